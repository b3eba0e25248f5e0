#include "facepipe/heads.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace facepipe {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

void check_label(std::span<const double> logits, std::size_t label, std::span<const double> weights) {
  if (label >= logits.size()) {
    throw IndexError("label " + std::to_string(label) + " out of range for " + std::to_string(logits.size()) +
                     " classes");
  }
  if (weights.size() != logits.size()) {
    throw ShapeError("weights length " + std::to_string(weights.size()) + " != " + std::to_string(logits.size()));
  }
  for (double w : weights) {
    if (!(w > 0) || !std::isfinite(w)) throw ParamError("class weights must be positive and finite");
  }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw EmptyInputError("softmax of an empty vector");
  require_finite(logits, "softmax input");
  const double zmax = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - zmax);
    sum += out[i];
  }
  for (auto& p : out) p /= sum;
  return out;
}

double expected_age(std::span<const double> probs, std::span<const double> ages, std::size_t top_l) {
  if (probs.empty()) throw EmptyInputError("empty age posterior");
  if (probs.size() != ages.size()) {
    throw ShapeError("posterior has " + std::to_string(probs.size()) + " entries but " +
                     std::to_string(ages.size()) + " ages were given");
  }
  if (top_l == 0) top_l = probs.size();
  if (top_l > probs.size()) {
    throw ParamError("L = " + std::to_string(top_l) + " exceeds the number of ages " +
                     std::to_string(probs.size()));
  }
  require_finite(probs, "age posterior");
  for (std::size_t i = 0; i < ages.size(); ++i) {
    if (!(ages[i] > 0) || (i > 0 && !(ages[i] > ages[i - 1]))) {
      throw ParamError("ages must be strictly increasing positive values");
    }
    if (probs[i] < 0) throw ParamError("posterior probabilities must be non-negative");
  }

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top_l), order.end(),
                    [&](std::size_t a, std::size_t b) { return probs[a] > probs[b] || (probs[a] == probs[b] && a < b); });

  double num = 0.0;
  double den = 0.0;
  for (std::size_t l = 0; l < top_l; ++l) {
    num += ages[order[l]] * probs[order[l]];
    den += probs[order[l]];
  }
  if (den == 0.0) throw DegenerateError("all selected age probabilities are zero");
  return num / den;
}

std::vector<double> class_weights(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw EmptyInputError("no class counts");
  for (auto n : counts) {
    if (n < 1) throw ParamError("every class count must be at least 1");
  }
  const double nmax = static_cast<double>(*std::max_element(counts.begin(), counts.end()));
  std::vector<double> w(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) w[i] = nmax / static_cast<double>(counts[i]);
  return w;
}

double weighted_ce_loss(std::span<const double> logits, std::size_t label, std::span<const double> weights) {
  check_label(logits, label, weights);
  require_finite(logits, "logits");
  // log-sum-exp keeps -log softmax accurate for confident predictions.
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - zmax);
  const double nll = zmax + std::log(sum) - logits[label];
  return std::max(0.0, nll) * weights[label];
}

std::vector<double> weighted_ce_grad(std::span<const double> logits, std::size_t label,
                                     std::span<const double> weights) {
  check_label(logits, label, weights);
  auto g = softmax(logits);
  g[label] -= 1.0;
  for (auto& v : g) v *= weights[label];
  return g;
}

std::vector<double> reduce_scores_8_to_7(std::span<const double> scores8, std::size_t contempt_index) {
  if (scores8.size() != 8) throw ShapeError("expected 8 scores, got " + std::to_string(scores8.size()));
  if (contempt_index >= 8) throw IndexError("contempt index " + std::to_string(contempt_index) + " out of range");
  require_finite(scores8, "scores");
  std::vector<double> out;
  out.reserve(7);
  double mass = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    if (i == contempt_index) continue;
    if (scores8[i] < 0) throw ParamError("scores must be non-negative probabilities");
    out.push_back(scores8[i]);
    mass += scores8[i];
  }
  if (!(mass > 0)) throw DegenerateError("no probability mass left after dropping contempt");
  for (auto& p : out) p /= mass;
  return out;
}

std::size_t map_label_8_to_7(std::size_t label8, std::size_t contempt_index) {
  if (label8 >= 8 || contempt_index >= 8) throw IndexError("label or contempt index out of range");
  if (label8 == contempt_index) throw IndexError("contempt label has no 7-class equivalent");
  return label8 < contempt_index ? label8 : label8 - 1;
}

double binary_ce(double p, int label) {
  if (!std::isfinite(p)) throw NumericError("non-finite probability in binary_ce");
  if (label != 0 && label != 1) throw ParamError("binary label must be 0 or 1");
  const double q = std::clamp(p, kBinaryCeClamp, 1.0 - kBinaryCeClamp);
  return label == 1 ? -std::log(q) : -std::log1p(-q);
}

int gender_from_probability(double p, double threshold) {
  if (!std::isfinite(p)) throw NumericError("non-finite probability");
  return p >= threshold ? 1 : 0;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace facepipe
