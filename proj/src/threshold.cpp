#include <cmath>
#include <vector>

#include "botwatch/error.hpp"
#include "botwatch/stats.hpp"
#include "botwatch/threshold.hpp"

namespace botwatch {

double calibrate_threshold(std::span<const double> scores, double target_fpr) {
  if (scores.size() < kMinCalibrationScores) {
    fail(ErrorCode::TooFewScores, "threshold calibration needs at least " +
                                      std::to_string(kMinCalibrationScores) + " scores, got " +
                                      std::to_string(scores.size()));
  }
  if (!(target_fpr >= 0.0 && target_fpr < 1.0)) {
    fail(ErrorCode::InvalidArgument, "target_fpr must lie in [0, 1)");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) fail(ErrorCode::InvalidArgument, "non-finite validation score");
  }
  return stats::quantile(std::vector<double>(scores.begin(), scores.end()), 1.0 - target_fpr);
}

}  // namespace botwatch
