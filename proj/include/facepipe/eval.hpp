#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "facepipe/errors.hpp"

namespace facepipe {

struct MeanStd {
  double mean = 0;
  double std = 0;  // population std over repetitions
};

/// Population mean and std; throws EmptyInputError on an empty input.
MeanStd mean_std(std::span<const double> values);

struct EvalReport {
  double accuracy = 0;                              // percent, in [0, 100]
  std::vector<double> recalls;                      // per class, percent; 0 for classes without support
  std::vector<std::vector<std::int64_t>> confusion; // [truth][pred]
  std::optional<double> mae;
  std::optional<MeanStd> mean_std;
  std::size_t n = 0;
};

EvalReport accuracy_and_confusion(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth,
                                  std::size_t classes);

double mean_absolute_error(std::span<const double> pred, std::span<const double> truth);

/// Recomputes accuracy and confusion over the entries where mask is true.
EvalReport subset_report(std::span<const std::int64_t> pred, std::span<const std::int64_t> truth,
                         std::size_t classes, const std::vector<bool>& mask);

/// JSON report: {"accuracy", "confusion", "mae", "mean", "std", "n"}.
/// Accuracy, mean and std are rounded to two decimals.
std::string report_to_json(const EvalReport& report, int indent = -1);

double round2(double v);

}  // namespace facepipe
