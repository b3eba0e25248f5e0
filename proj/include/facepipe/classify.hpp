#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "facepipe/embeddings_io.hpp"
#include "facepipe/eval.hpp"

namespace facepipe {

struct TrainConfig {
  double lambda = 1e-4;     // L2 regularization
  std::size_t epochs = 50;  // passes over the data; step size 1 / (lambda * t)
  std::uint64_t seed = 42;
  unsigned threads = 0;     // 0: hardware concurrency; does not affect results
};

/// One-vs-rest linear classifier: score_c(x) = w_c . x + b_c.
struct LinearModel {
  std::size_t classes = 0;
  std::size_t dim = 0;
  std::vector<float> weights;  // classes x dim, row-major
  std::vector<float> biases;   // classes
  TrainConfig config;
  /// Per class, the primal objective after each epoch. Empty for models
  /// read from disk.
  std::vector<std::vector<double>> objective_history;

  std::span<const float> weight_row(std::size_t c) const {
    return std::span<const float>(weights).subspan(c * dim, dim);
  }
};

/// Trains one binary hinge + L2 classifier per class with Pegasos-style
/// stochastic subgradient descent. The bias is an extra constant input
/// feature and is regularized with the weights. Labels must lie in
/// [0, C) with C = max label + 1 and at least two distinct values.
LinearModel train_linear_svm(const EmbeddingMatrix& x, std::span<const std::int64_t> labels,
                             const TrainConfig& config = {});

struct Prediction {
  std::size_t label = 0;
  std::vector<double> scores;
};

/// Argmax over one-vs-rest scores; ties go to the lowest class index.
Prediction svm_predict(const LinearModel& model, std::span<const float> x);

/// LSVM container: "LSVM", u32 C, u32 D, C*D weights, C biases (LE float32).
void write_linear_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel read_linear_model(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_linear_model(const LinearModel& model);
LinearModel decode_linear_model(std::span<const std::uint8_t> bytes);

/// Single-sample binary SVM objective over an augmented weight vector
/// w = (w_1..w_D, b):  lambda/2 |w|^2 + max(0, 1 - y (w . x + b)),
/// with y in {-1, +1}.
double svm_sample_objective(std::span<const double> w_aug, std::span<const float> x, int y, double lambda);

/// Subgradient of svm_sample_objective; at the kink (margin exactly 1) the
/// hinge term contributes zero.
std::vector<double> svm_sample_subgradient(std::span<const double> w_aug, std::span<const float> x, int y,
                                           double lambda);

/// Majority vote among the k nearest training rows (Euclidean). Distance
/// ties go to the lower training index; vote ties to the lowest label.
std::int64_t knn_predict(const EmbeddingMatrix& train, std::span<const std::int64_t> labels,
                         std::span<const float> query, std::size_t k);

struct Rank1Options {
  std::size_t repetitions = 10;
  std::uint64_t seed = 42;
  /// Probe with the gallery embeddings themselves instead of the held-out
  /// ones (self-match sanity check).
  bool probe_with_gallery = false;
  unsigned threads = 0;
};

/// Rank-1 identification with one gallery embedding per subject, picked
/// uniformly at random per repetition (seed + repetition index). Every
/// other embedding is a probe, matched to the nearest gallery entry on
/// L2-normalized vectors. Accuracy and mean_std are in percent.
EvalReport rank1_identification(std::span<const EmbeddingMatrix> subjects, const Rank1Options& options = {});

/// Groups the rows of `embeddings` by subject id, in order of first
/// appearance.
std::vector<EmbeddingMatrix> group_by_subject(const EmbeddingMatrix& embeddings,
                                              std::span<const std::int64_t> subject_ids);

}  // namespace facepipe
