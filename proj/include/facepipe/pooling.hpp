#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "facepipe/embeddings_io.hpp"

namespace facepipe {

enum class PoolingMode {
  SingleFace,  // largest face per frame, [mean; max; min; std] over frames
  Group,       // [mean; std] over faces, then [mean; std] over frames
};

enum class FacePolicy { LargestBox };

struct VideoDescriptor {
  std::vector<float> values;
  PoolingMode mode = PoolingMode::SingleFace;
  bool valid = true;  // false: no face anywhere in the clip, values are all 0
};

/// Descriptor length for embeddings of dimension `dim`; 4*dim in both modes.
constexpr std::size_t descriptor_length(PoolingMode, std::size_t dim) noexcept { return 4 * dim; }

/// [mean; max; min; std] per dimension over the rows of `frames`. Std is the
/// population std (divisor T). Throws EmptyInputError for T = 0 and
/// NumericError on NaN/Inf.
VideoDescriptor stat_pool_video(const EmbeddingMatrix& frames);

/// [mean; std] over the faces of a single frame, length 2*D.
std::vector<float> group_pool_frame(const EmbeddingMatrix& faces);

/// [mean; std] over per-frame group descriptors (rows of length 2*D),
/// length 4*D.
VideoDescriptor group_pool_video(const EmbeddingMatrix& frame_descriptors);

/// Unit-L2 copy of `v`; the zero vector maps to itself.
std::vector<float> l2_normalize(std::span<const float> v);

struct DescriptorOptions {
  PoolingMode mode = PoolingMode::SingleFace;
  FacePolicy face_policy = FacePolicy::LargestBox;
  bool l2 = true;
  /// Embedding dimension used for the zero descriptor when a clip has no
  /// faces. 0 means "take it from the store".
  std::size_t dim = 0;
};

/// Pools one clip. Face-less frames are skipped; a clip without any face
/// yields the exact zero descriptor with valid = false.
VideoDescriptor descriptor_for_video(const VideoSample& sample, EmbeddingStore& store,
                                     const DescriptorOptions& options = {});

/// Pools a batch. Results are identical to calling descriptor_for_video in a
/// loop, independent of `threads`.
std::vector<VideoDescriptor> descriptors_for_videos(std::span<const VideoSample> samples,
                                                    EmbeddingStore& store,
                                                    const DescriptorOptions& options = {},
                                                    unsigned threads = 0);

/// Stacks descriptors into one row per video.
EmbeddingMatrix to_matrix(std::span<const VideoDescriptor> descriptors);

}  // namespace facepipe
