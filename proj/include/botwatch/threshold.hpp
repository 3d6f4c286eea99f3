#pragma once

#include <span>

namespace botwatch {

/// Minimum number of benign validation scores for calibration.
inline constexpr std::size_t kMinCalibrationScores = 50;

/// Interpolated (1 - target_fpr) quantile of benign validation scores.
/// target_fpr = 0 gives the maximum. Throws Error(TooFewScores).
double calibrate_threshold(std::span<const double> scores, double target_fpr);

inline bool flag(double score, double threshold) noexcept { return score > threshold; }

}  // namespace botwatch
