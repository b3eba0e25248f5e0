#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace facepipe::synthetic {

/// Class-conditional Gaussian video dataset. Each face embedding is
/// mean_c + sigma * N(0, I), with class means placed on orthogonal axes so
/// that every pair of means is `separation * sigma` apart.
struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t videos_per_class = 20;
  std::size_t frames_per_video = 8;
  std::size_t min_faces = 1;  // per face-bearing frame, drawn uniformly
  std::size_t max_faces = 1;
  std::size_t dim = 16;
  double separation = 6.0;
  double sigma = 1.0;
  std::uint64_t seed = 42;
  double faceless_fraction = 0.0;  // videos with no face in any frame, in [0, 1)
  double empty_frame_prob = 0.0;   // per-frame dropout inside face-bearing videos
};

struct GeneratedDataset {
  std::filesystem::path manifest;    // manifest.jsonl
  std::filesystem::path embeddings;  // embeddings.emb, every face row
  std::filesystem::path labels;      // labels.txt, one per video in manifest order
  std::size_t videos = 0;
  std::size_t faceless_videos = 0;
};

/// Writes the dataset under `out_dir` (created if needed). Output bytes
/// depend only on `spec`.
GeneratedDataset generate_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace facepipe::synthetic
