#include "facepipe/classify.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "facepipe/detail/parallel.hpp"
#include "facepipe/detail/random.hpp"
#include "facepipe/pooling.hpp"

namespace facepipe {

namespace {

double dot(std::span<const double> w, std::span<const float> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
  return s;
}

double squared_norm(std::span<const float> x) {
  double s = 0.0;
  for (float v : x) s += static_cast<double>(v) * v;
  return s;
}

// Weights kept as scale * v so the (1 - 1/t) shrink is O(1). The last
// entry of v is the bias.
class ScaledWeights {
 public:
  explicit ScaledWeights(std::size_t dim) : v_(dim + 1, 0.0) {}

  double decision(std::span<const float> x) const { return scale_ * (dot(v_, x) + v_.back()); }

  void shrink(double factor) {
    scale_ *= factor;
    if (scale_ == 0.0) {
      std::fill(v_.begin(), v_.end(), 0.0);
      scale_ = 1.0;
      norm2_ = 0.0;
    } else if (scale_ < 1e-10) {
      fold();
    }
  }

  // w += a * (x, 1)
  void add(double a, std::span<const float> x, double x_norm2) {
    const double b = a / scale_;
    const double vx = dot(v_, x) + v_.back();
    for (std::size_t i = 0; i < x.size(); ++i) v_[i] += b * x[i];
    v_.back() += b;
    norm2_ += 2.0 * b * vx + b * b * (x_norm2 + 1.0);
  }

  double norm2() const { return scale_ * scale_ * std::max(norm2_, 0.0); }

  void project(double radius) {
    const double n = std::sqrt(norm2());
    if (n > radius) shrink(radius / n);
  }

  std::vector<double> materialize() const {
    std::vector<double> w(v_);
    for (auto& x : w) x *= scale_;
    return w;
  }

 private:
  void fold() {
    for (auto& x : v_) x *= scale_;
    norm2_ = 0.0;
    for (double x : v_) norm2_ += x * x;
    scale_ = 1.0;
  }

  std::vector<double> v_;
  double scale_ = 1.0;
  double norm2_ = 0.0;
};

double binary_objective(const std::vector<double>& w, const EmbeddingMatrix& x, std::span<const int> y,
                        double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double f = dot(w, x.row(i)) + w.back();
    hinge += std::max(0.0, 1.0 - y[i] * f);
  }
  double n2 = 0.0;
  for (double v : w) n2 += v * v;
  return 0.5 * lambda * n2 + hinge / static_cast<double>(x.rows());
}

struct BinaryResult {
  std::vector<double> w;  // dim + 1, bias last
  std::vector<double> history;
};

BinaryResult train_binary(const EmbeddingMatrix& x, std::span<const int> y, const std::vector<double>& norms2,
                          const TrainConfig& config, std::uint64_t stream) {
  const std::size_t n = x.rows();
  const double radius = 1.0 / std::sqrt(config.lambda);
  auto rng = detail::make_rng(config.seed, stream);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  ScaledWeights w(x.dim());
  BinaryResult result;
  result.history.reserve(config.epochs);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    detail::shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (config.lambda * static_cast<double>(t));
      const auto row = x.row(i);
      const double margin = y[i] * w.decision(row);
      w.shrink(1.0 - 1.0 / static_cast<double>(t));
      if (margin < 1.0) w.add(eta * y[i], row, norms2[i]);
      w.project(radius);
    }
    result.history.push_back(binary_objective(w.materialize(), x, y, config.lambda));
  }
  result.w = w.materialize();
  return result;
}

constexpr std::array<char, 4> kModelMagic = {'L', 'S', 'V', 'M'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[offset + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

LinearModel train_linear_svm(const EmbeddingMatrix& x, std::span<const std::int64_t> labels,
                             const TrainConfig& config) {
  if (labels.size() != x.rows()) {
    throw ShapeError(std::to_string(x.rows()) + " training rows but " + std::to_string(labels.size()) + " labels");
  }
  if (x.rows() < 2) throw DegenerateLabelsError("need at least two training samples");
  if (!(config.lambda > 0) || !std::isfinite(config.lambda)) throw ParamError("lambda must be positive");
  if (config.epochs == 0) throw ParamError("epochs must be positive");
  for (float v : x.data()) {
    if (!std::isfinite(v)) throw NumericError("non-finite value in training data");
  }
  std::int64_t max_label = -1;
  for (auto l : labels) {
    if (l < 0) throw ParamError("labels must be non-negative class indices");
    max_label = std::max(max_label, l);
  }
  if (std::all_of(labels.begin(), labels.end(), [&](auto l) { return l == labels.front(); })) {
    throw DegenerateLabelsError("all training labels are identical");
  }

  LinearModel model;
  model.classes = static_cast<std::size_t>(max_label) + 1;
  model.dim = x.dim();
  model.config = config;
  model.weights.assign(model.classes * model.dim, 0.0f);
  model.biases.assign(model.classes, 0.0f);
  model.objective_history.resize(model.classes);

  std::vector<double> norms2(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) norms2[i] = squared_norm(x.row(i));

  detail::parallel_for(model.classes, config.threads, [&](std::size_t c) {
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == static_cast<std::int64_t>(c) ? 1 : -1;
    auto result = train_binary(x, y, norms2, config, c);
    for (std::size_t d = 0; d < model.dim; ++d) model.weights[c * model.dim + d] = static_cast<float>(result.w[d]);
    model.biases[c] = static_cast<float>(result.w.back());
    model.objective_history[c] = std::move(result.history);
  });
  return model;
}

Prediction svm_predict(const LinearModel& model, std::span<const float> x) {
  if (x.size() != model.dim) {
    throw ShapeError("input of length " + std::to_string(x.size()) + " for a model of dim " +
                     std::to_string(model.dim));
  }
  Prediction p;
  p.scores.resize(model.classes);
  for (std::size_t c = 0; c < model.classes; ++c) {
    const auto w = model.weight_row(c);
    double s = model.biases[c];
    for (std::size_t d = 0; d < model.dim; ++d) s += static_cast<double>(w[d]) * x[d];
    p.scores[c] = s;
    if (s > p.scores[p.label]) p.label = c;
  }
  return p;
}

std::vector<std::uint8_t> encode_linear_model(const LinearModel& model) {
  if (model.weights.size() != model.classes * model.dim || model.biases.size() != model.classes) {
    throw ShapeError("linear model arrays do not match its header");
  }
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * (model.weights.size() + model.biases.size()));
  out.insert(out.end(), kModelMagic.begin(), kModelMagic.end());
  put_u32(out, static_cast<std::uint32_t>(model.classes));
  put_u32(out, static_cast<std::uint32_t>(model.dim));
  for (float v : model.weights) put_u32(out, std::bit_cast<std::uint32_t>(v));
  for (float v : model.biases) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

LinearModel decode_linear_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
    throw FormatError("bad magic: expected \"LSVM\"");
  }
  if (bytes.size() < 12) throw TruncationError("LSVM header is truncated");
  LinearModel m;
  m.classes = get_u32(bytes, 4);
  m.dim = get_u32(bytes, 8);
  if (m.classes < 2 || m.dim == 0) throw FormatError("LSVM header needs C >= 2 and D > 0");
  const std::uint64_t floats = std::uint64_t{m.classes} * m.dim + m.classes;
  if (bytes.size() - 12 != floats * 4) throw TruncationError("LSVM payload size does not match its header");
  m.weights.resize(m.classes * m.dim);
  m.biases.resize(m.classes);
  std::size_t off = 12;
  for (auto& v : m.weights) {
    v = std::bit_cast<float>(get_u32(bytes, off));
    off += 4;
  }
  for (auto& v : m.biases) {
    v = std::bit_cast<float>(get_u32(bytes, off));
    off += 4;
  }
  return m;
}

void write_linear_model(const LinearModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_linear_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

LinearModel read_linear_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_linear_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  }
}

double svm_sample_objective(std::span<const double> w_aug, std::span<const float> x, int y, double lambda) {
  if (w_aug.size() != x.size() + 1) throw ShapeError("augmented weights must have length dim + 1");
  double n2 = 0.0;
  for (double v : w_aug) n2 += v * v;
  const double f = dot(w_aug, x) + w_aug.back();
  return 0.5 * lambda * n2 + std::max(0.0, 1.0 - y * f);
}

std::vector<double> svm_sample_subgradient(std::span<const double> w_aug, std::span<const float> x, int y,
                                           double lambda) {
  if (w_aug.size() != x.size() + 1) throw ShapeError("augmented weights must have length dim + 1");
  std::vector<double> g(w_aug.begin(), w_aug.end());
  for (auto& v : g) v *= lambda;
  const double f = dot(w_aug, x) + w_aug.back();
  if (y * f < 1.0) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] -= y * static_cast<double>(x[i]);
    g.back() -= y;
  }
  return g;
}

std::int64_t knn_predict(const EmbeddingMatrix& train, std::span<const std::int64_t> labels,
                         std::span<const float> query, std::size_t k) {
  if (labels.size() != train.rows()) throw ShapeError("training rows and labels differ in length");
  if (query.size() != train.dim()) throw ShapeError("query length does not match training dim");
  if (k == 0 || k > train.rows()) {
    throw ParamError("k = " + std::to_string(k) + " must be in [1, " + std::to_string(train.rows()) + "]");
  }
  std::vector<std::pair<double, std::size_t>> dist(train.rows());
  for (std::size_t i = 0; i < train.rows(); ++i) {
    const auto row = train.row(i);
    double s = 0.0;
    for (std::size_t d = 0; d < row.size(); ++d) {
      const double diff = static_cast<double>(row[d]) - query[d];
      s += diff * diff;
    }
    dist[i] = {s, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::map<std::int64_t, std::size_t> votes;
  for (std::size_t j = 0; j < k; ++j) ++votes[labels[dist[j].second]];
  std::int64_t best = votes.begin()->first;
  std::size_t best_votes = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_votes) {
      best = label;
      best_votes = count;
    }
  }
  return best;
}

EvalReport rank1_identification(std::span<const EmbeddingMatrix> subjects, const Rank1Options& options) {
  if (subjects.size() < 2) throw ProtocolError("rank-1 identification needs at least two subjects");
  if (options.repetitions == 0) throw ParamError("repetitions must be positive");
  const std::size_t dim = subjects.front().dim();
  std::vector<EmbeddingMatrix> normed;
  normed.reserve(subjects.size());
  std::size_t total = 0;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const auto& m = subjects[s];
    if (m.rows() < 2) {
      throw ProtocolError("subject " + std::to_string(s) + " has " + std::to_string(m.rows()) +
                          " embeddings; at least 2 are required");
    }
    if (m.dim() != dim) throw ShapeError("subjects have different embedding dimensions");
    EmbeddingMatrix n(dim);
    n.reserve_rows(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) n.append_row(l2_normalize(m.row(r)));
    normed.push_back(std::move(n));
    total += m.rows();
  }
  const std::size_t probes_per_rep = options.probe_with_gallery ? subjects.size() : total - subjects.size();

  std::vector<double> accuracies(options.repetitions);
  detail::parallel_for(options.repetitions, options.threads, [&](std::size_t rep) {
    auto rng = detail::make_rng(options.seed + rep);
    std::vector<std::size_t> gallery_index(normed.size());
    for (std::size_t s = 0; s < normed.size(); ++s) gallery_index[s] = detail::uniform_index(rng, normed[s].rows());

    std::size_t correct = 0;
    for (std::size_t s = 0; s < normed.size(); ++s) {
      for (std::size_t r = 0; r < normed[s].rows(); ++r) {
        if ((r == gallery_index[s]) != options.probe_with_gallery) continue;
        const auto probe = normed[s].row(r);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < normed.size(); ++g) {
          const auto ref = normed[g].row(gallery_index[g]);
          double d2 = 0.0;
          for (std::size_t d = 0; d < dim; ++d) {
            const double diff = static_cast<double>(probe[d]) - ref[d];
            d2 += diff * diff;
          }
          if (d2 < best_d) {
            best_d = d2;
            best = g;
          }
        }
        if (best == s) ++correct;
      }
    }
    accuracies[rep] = 100.0 * static_cast<double>(correct) / static_cast<double>(probes_per_rep);
  });

  EvalReport report;
  report.mean_std = mean_std(accuracies);
  report.accuracy = report.mean_std->mean;
  report.n = probes_per_rep;
  return report;
}

std::vector<EmbeddingMatrix> group_by_subject(const EmbeddingMatrix& embeddings,
                                              std::span<const std::int64_t> subject_ids) {
  if (subject_ids.size() != embeddings.rows()) {
    throw ShapeError(std::to_string(embeddings.rows()) + " embeddings but " + std::to_string(subject_ids.size()) +
                     " subject ids");
  }
  std::map<std::int64_t, std::size_t> slot;
  std::vector<EmbeddingMatrix> groups;
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    auto [it, inserted] = slot.try_emplace(subject_ids[i], groups.size());
    if (inserted) groups.emplace_back(embeddings.dim());
    groups[it->second].append_row(embeddings.row(i));
  }
  return groups;
}

}  // namespace facepipe
