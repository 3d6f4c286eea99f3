#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace botwatch {

/// Anomaly is the positive class.
struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  void add(bool predicted, bool actual) noexcept;
};

/// Undefined ratios (0/0) are nullopt.
struct BinaryMetrics {
  std::optional<double> precision, accuracy, recall, fpr, f1;
};

BinaryMetrics binary_metrics(const Confusion& c);

/// Area under the ROC curve with ties counted 1/2. `positive[i]` marks
/// anomalies. Throws Error(SingleClass) unless both classes occur.
double auc(std::span<const double> scores, const std::vector<bool>& positive);

struct RocPoint {
  double threshold;  ///< flag when score >= threshold
  double fpr;
  double tpr;
};

/// One point per distinct score, descending threshold, starting at (0, 0).
std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& positive);

}  // namespace botwatch
