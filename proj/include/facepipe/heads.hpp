#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "facepipe/errors.hpp"

namespace facepipe {

/// Numerically stable softmax (shifted by max z).
std::vector<double> softmax(std::span<const double> logits);

/// Expected age over the `top_l` ages with the largest posterior:
///   sum(a_l * p_l) / sum(p_l)
/// Ties in the selection go to the lower age index. `top_l` = 0 means all
/// ages. Throws DegenerateError when every selected probability is zero.
double expected_age(std::span<const double> probs, std::span<const double> ages, std::size_t top_l = 0);

/// w_y = max_c N_c / N_y.
std::vector<double> class_weights(std::span<const std::int64_t> counts);

/// -log softmax(z)_y * w_y.
double weighted_ce_loss(std::span<const double> logits, std::size_t label, std::span<const double> weights);

/// d loss / d z = w_y * (softmax(z) - onehot(y)).
std::vector<double> weighted_ce_grad(std::span<const double> logits, std::size_t label,
                                     std::span<const double> weights);

/// Drops the contempt entry from an 8-way posterior and renormalizes the
/// remaining 7 to sum to 1.
std::vector<double> reduce_scores_8_to_7(std::span<const double> scores8, std::size_t contempt_index);

/// Maps a label in the 8-class space to the 7-class space produced by
/// reduce_scores_8_to_7. Throws IndexError for the contempt label itself.
std::size_t map_label_8_to_7(std::size_t label8, std::size_t contempt_index);

inline constexpr double kBinaryCeClamp = 1e-7;

/// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double binary_ce(double p, int label);

inline constexpr double kDefaultGenderThreshold = 0.5;

/// 1 if p >= threshold, else 0.
int gender_from_probability(double p, double threshold = kDefaultGenderThreshold);

std::size_t argmax(std::span<const double> values);

}  // namespace facepipe
