#include "facepipe/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "facepipe/detail/parallel.hpp"

namespace facepipe {

namespace {

void require_finite(const EmbeddingMatrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.dim(); ++c) {
      if (!std::isfinite(m(r, c))) {
        throw NumericError("non-finite value at row " + std::to_string(r) + ", column " +
                           std::to_string(c));
      }
    }
  }
}

// Per-dimension running statistics in double precision. Std uses a second
// pass around the final mean.
struct ColumnStats {
  std::vector<double> mean, max, min, std;
};

ColumnStats column_stats(const EmbeddingMatrix& m, bool with_extrema) {
  const std::size_t d = m.dim();
  const std::size_t t = m.rows();
  ColumnStats s;
  s.mean.assign(d, 0.0);
  s.std.assign(d, 0.0);
  if (with_extrema) {
    s.max.assign(d, -std::numeric_limits<double>::infinity());
    s.min.assign(d, std::numeric_limits<double>::infinity());
  }
  for (std::size_t r = 0; r < t; ++r) {
    const float* row = m.data().data() + r * d;
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += row[c];
    if (with_extrema) {
      for (std::size_t c = 0; c < d; ++c) {
        s.max[c] = std::max(s.max[c], static_cast<double>(row[c]));
        s.min[c] = std::min(s.min[c], static_cast<double>(row[c]));
      }
    }
  }
  const double inv_t = 1.0 / static_cast<double>(t);
  for (auto& v : s.mean) v *= inv_t;
  for (std::size_t r = 0; r < t; ++r) {
    const float* row = m.data().data() + r * d;
    for (std::size_t c = 0; c < d; ++c) {
      const double dev = row[c] - s.mean[c];
      s.std[c] += dev * dev;
    }
  }
  for (auto& v : s.std) v = std::sqrt(v * inv_t);
  return s;
}

void append_block(std::vector<float>& out, const std::vector<double>& block) {
  for (double v : block) out.push_back(static_cast<float>(v));
}

}  // namespace

VideoDescriptor stat_pool_video(const EmbeddingMatrix& frames) {
  if (frames.empty()) throw EmptyInputError("stat pooling needs at least one frame");
  require_finite(frames);
  const auto s = column_stats(frames, true);
  VideoDescriptor out;
  out.mode = PoolingMode::SingleFace;
  out.values.reserve(4 * frames.dim());
  append_block(out.values, s.mean);
  append_block(out.values, s.max);
  append_block(out.values, s.min);
  append_block(out.values, s.std);
  return out;
}

std::vector<float> group_pool_frame(const EmbeddingMatrix& faces) {
  if (faces.empty()) throw EmptyInputError("group frame pooling needs at least one face");
  require_finite(faces);
  const auto s = column_stats(faces, false);
  std::vector<float> out;
  out.reserve(2 * faces.dim());
  append_block(out, s.mean);
  append_block(out, s.std);
  return out;
}

VideoDescriptor group_pool_video(const EmbeddingMatrix& frame_descriptors) {
  if (frame_descriptors.empty()) throw EmptyInputError("group video pooling needs at least one frame");
  require_finite(frame_descriptors);
  const auto s = column_stats(frame_descriptors, false);
  VideoDescriptor out;
  out.mode = PoolingMode::Group;
  out.values.reserve(2 * frame_descriptors.dim());
  append_block(out.values, s.mean);
  append_block(out.values, s.std);
  return out;
}

std::vector<float> l2_normalize(std::span<const float> v) {
  double sq = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite value in l2_normalize");
    sq += static_cast<double>(x) * x;
  }
  std::vector<float> out(v.begin(), v.end());
  if (sq == 0.0) return out;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : out) x = static_cast<float>(x * inv);
  return out;
}

VideoDescriptor descriptor_for_video(const VideoSample& sample, EmbeddingStore& store,
                                     const DescriptorOptions& options) {
  VideoDescriptor out;
  out.mode = options.mode;

  if (!sample.has_faces()) {
    const std::size_t dim = options.dim != 0 ? options.dim : store.dim();
    if (dim == 0) {
      throw ParamError("sample '" + sample.id + "' has no faces and the embedding dimension is unknown");
    }
    out.values.assign(descriptor_length(options.mode, dim), 0.0f);
    out.valid = false;
    return out;
  }

  auto resolve = [&](const FaceDetection& face) {
    try {
      return store.resolve(face);
    } catch (const RefError& e) {
      throw RefError("sample '" + sample.id + "': " + e.what());
    }
  };

  std::size_t dim = 0;
  for (const auto& frame : sample.frames) {
    if (!frame.empty()) {
      dim = resolve(frame.front()).size();
      break;
    }
  }

  if (options.mode == PoolingMode::SingleFace) {
    EmbeddingMatrix stacked(dim);
    stacked.reserve_rows(sample.frames.size());
    for (const auto& frame : sample.frames) {
      if (frame.empty()) continue;
      stacked.append_row(resolve(frame[select_primary_face(frame)]));
    }
    out = stat_pool_video(stacked);
  } else {
    EmbeddingMatrix frame_descriptors(2 * dim);
    frame_descriptors.reserve_rows(sample.frames.size());
    for (const auto& frame : sample.frames) {
      if (frame.empty()) continue;
      EmbeddingMatrix faces(dim);
      faces.reserve_rows(frame.size());
      for (const auto& face : frame) faces.append_row(resolve(face));
      frame_descriptors.append_row(group_pool_frame(faces));
    }
    out = group_pool_video(frame_descriptors);
  }
  if (options.dim != 0 && out.values.size() != descriptor_length(options.mode, options.dim)) {
    throw ShapeError("sample '" + sample.id + "' has embeddings of dimension " + std::to_string(dim) +
                     ", expected " + std::to_string(options.dim));
  }
  if (options.l2) out.values = l2_normalize(out.values);
  out.valid = true;
  return out;
}

std::vector<VideoDescriptor> descriptors_for_videos(std::span<const VideoSample> samples,
                                                    EmbeddingStore& store,
                                                    const DescriptorOptions& options,
                                                    unsigned threads) {
  // Load every referenced file up front so the workers only read the store.
  for (const auto& s : samples) {
    for (const auto& frame : s.frames) {
      for (const auto& face : frame) store.get(face.file);
    }
  }
  DescriptorOptions opts = options;
  if (opts.dim == 0) opts.dim = store.dim();
  std::vector<VideoDescriptor> out(samples.size());
  detail::parallel_for(samples.size(), threads,
                       [&](std::size_t i) { out[i] = descriptor_for_video(samples[i], store, opts); });
  return out;
}

EmbeddingMatrix to_matrix(std::span<const VideoDescriptor> descriptors) {
  if (descriptors.empty()) throw EmptyInputError("no descriptors to stack");
  EmbeddingMatrix m(descriptors.front().values.size());
  m.reserve_rows(descriptors.size());
  for (const auto& d : descriptors) m.append_row(d.values);
  return m;
}

}  // namespace facepipe
