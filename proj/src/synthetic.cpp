#include "facepipe/synthetic.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "facepipe/detail/random.hpp"
#include "facepipe/embeddings_io.hpp"

namespace facepipe::synthetic {

namespace {

void validate(const SyntheticSpec& s) {
  if (s.classes < 1 || s.videos_per_class < 1 || s.frames_per_video < 1 || s.dim < 1) {
    throw ParamError("synthetic spec sizes must be positive");
  }
  if (s.dim < s.classes) throw ParamError("synthetic spec needs dim >= classes");
  if (s.min_faces < 1 || s.max_faces < s.min_faces) throw ParamError("need 1 <= min_faces <= max_faces");
  if (!(s.separation > 0) || !(s.sigma > 0)) throw ParamError("separation and sigma must be positive");
  if (!(s.faceless_fraction >= 0 && s.faceless_fraction < 1)) throw ParamError("faceless_fraction must be in [0, 1)");
  if (!(s.empty_frame_prob >= 0 && s.empty_frame_prob < 1)) throw ParamError("empty_frame_prob must be in [0, 1)");
}

}  // namespace

GeneratedDataset generate_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  validate(spec);
  std::filesystem::create_directories(out_dir);
  auto rng = detail::make_rng(spec.seed);

  const std::size_t n_videos = spec.classes * spec.videos_per_class;
  const auto n_faceless = static_cast<std::size_t>(std::llround(spec.faceless_fraction * static_cast<double>(n_videos)));
  std::vector<std::size_t> order(n_videos);
  std::iota(order.begin(), order.end(), std::size_t{0});
  detail::shuffle(std::span<std::size_t>(order), rng);
  std::vector<bool> faceless(n_videos, false);
  for (std::size_t i = 0; i < n_faceless; ++i) faceless[order[i]] = true;

  const double offset = spec.separation * spec.sigma / std::sqrt(2.0);
  const std::string emb_name = "embeddings.emb";
  EmbeddingMatrix embeddings(spec.dim);
  std::vector<VideoSample> samples;
  std::vector<std::int64_t> labels;
  samples.reserve(n_videos);

  for (std::size_t v = 0; v < n_videos; ++v) {
    const std::size_t label = v % spec.classes;
    VideoSample s;
    s.id = "video_" + std::to_string(v);
    s.label = static_cast<std::int64_t>(label);
    bool any_face = false;
    for (std::size_t f = 0; f < spec.frames_per_video; ++f) {
      Frame frame;
      const bool dropped = faceless[v] || detail::uniform01(rng) < spec.empty_frame_prob;
      // Keep at least one face in face-bearing videos.
      const bool force = !faceless[v] && !any_face && f + 1 == spec.frames_per_video;
      if (!dropped || force) {
        const std::size_t faces = spec.min_faces + detail::uniform_index(rng, spec.max_faces - spec.min_faces + 1);
        for (std::size_t k = 0; k < faces; ++k) {
          std::vector<float> e(spec.dim);
          for (std::size_t d = 0; d < spec.dim; ++d) {
            e[d] = static_cast<float>(spec.sigma * detail::standard_normal(rng) + (d == label ? offset : 0.0));
          }
          FaceDetection det;
          det.box = {std::floor(detail::uniform01(rng) * 200.0), std::floor(detail::uniform01(rng) * 200.0),
                     16.0 + std::floor(detail::uniform01(rng) * 100.0), 16.0 + std::floor(detail::uniform01(rng) * 100.0)};
          det.file = emb_name;
          det.row = static_cast<std::uint32_t>(embeddings.rows());
          embeddings.append_row(e);
          frame.push_back(std::move(det));
        }
        any_face = true;
      }
      s.frames.push_back(std::move(frame));
    }
    labels.push_back(s.label);
    samples.push_back(std::move(s));
  }

  GeneratedDataset out;
  out.manifest = out_dir / "manifest.jsonl";
  out.embeddings = out_dir / emb_name;
  out.labels = out_dir / "labels.txt";
  out.videos = n_videos;
  out.faceless_videos = n_faceless;
  write_embedding_file(embeddings, out.embeddings);
  write_manifest(samples, out.manifest);
  write_label_file(labels, out.labels);
  return out;
}

}  // namespace facepipe::synthetic
