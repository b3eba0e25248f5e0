#include "facepipe/eval.hpp"

#include <cmath>

#include "json.hpp"

namespace facepipe {

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw EmptyInputError("mean/std of an empty sequence");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

EvalReport accuracy_and_confusion(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth,
                                  std::size_t classes) {
  if (pred.size() != truth.size()) {
    throw ShapeError(std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) + " labels");
  }
  if (pred.empty()) throw EmptyInputError("no predictions to evaluate");
  if (classes == 0) throw ParamError("class count must be positive");
  EvalReport r;
  r.n = pred.size();
  r.confusion.assign(classes, std::vector<std::int64_t>(classes, 0));
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(pred[i]) >= classes ||
        static_cast<std::size_t>(truth[i]) >= classes) {
      throw IndexError("label out of range at position " + std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
    if (pred[i] == truth[i]) ++correct;
  }
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(r.n);
  r.recalls.resize(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    std::int64_t support = 0;
    for (auto v : r.confusion[c]) support += v;
    if (support > 0) r.recalls[c] = 100.0 * static_cast<double>(r.confusion[c][c]) / static_cast<double>(support);
  }
  return r;
}

double mean_absolute_error(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError(std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) + " targets");
  }
  if (pred.empty()) throw EmptyInputError("MAE of an empty sequence");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

EvalReport subset_report(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth,
                         std::size_t classes, const std::vector<bool>& mask) {
  if (mask.size() != pred.size() || pred.size() != truth.size()) {
    throw ShapeError("mask, predictions and labels must have equal length");
  }
  std::vector<std::int64_t> p;
  std::vector<std::int64_t> t;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    p.push_back(pred[i]);
    t.push_back(truth[i]);
  }
  if (p.empty()) throw EmptyInputError("subset mask selects no samples");
  return accuracy_and_confusion(p, t, classes);
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string report_to_json(const EvalReport& report, int indent) {
  nlohmann::ordered_json j;
  j["accuracy"] = round2(report.accuracy);
  j["confusion"] = report.confusion;
  j["mae"] = report.mae ? nlohmann::ordered_json(*report.mae) : nlohmann::ordered_json(nullptr);
  if (report.mean_std) {
    j["mean"] = round2(report.mean_std->mean);
    j["std"] = round2(report.mean_std->std);
  } else {
    j["mean"] = nullptr;
    j["std"] = nullptr;
  }
  j["n"] = report.n;
  return j.dump(indent);
}

}  // namespace facepipe
