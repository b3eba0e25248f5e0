#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "facepipe/embeddings_io.hpp"

namespace facepipe::testing {

struct Blobs {
  EmbeddingMatrix x{1};
  std::vector<std::int64_t> y;
  EmbeddingMatrix means{1};
};

/// Isotropic Gaussian blobs (sigma = 1) with class means on orthogonal axes,
/// every pair of means `separation` apart.
inline Blobs make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double separation,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Blobs b{EmbeddingMatrix(dim), {}, EmbeddingMatrix(dim, classes)};
  const double offset = separation / std::sqrt(2.0);
  for (std::size_t c = 0; c < classes; ++c) b.means(c, c) = static_cast<float>(offset);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<float> row(dim);
      for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<float>(b.means(c, d) + noise(rng));
      b.x.append_row(row);
      b.y.push_back(static_cast<std::int64_t>(c));
    }
  }
  return b;
}

}  // namespace facepipe::testing
