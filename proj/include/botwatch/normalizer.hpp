#pragma once

#include <string>
#include <vector>

#include "botwatch/features.hpp"

namespace botwatch {

/// Z-score statistics fitted on benign training data. Constant columns are
/// recorded and removed on apply.
struct NormalizationStats {
  FeatureManifest input;     ///< manifest the stats were fitted on
  FeatureManifest retained;  ///< input minus dropped columns
  std::vector<std::size_t> retained_index;  ///< positions in `input`
  std::vector<double> mean;
  std::vector<double> stddev;  ///< population std, > 0
  std::vector<std::string> dropped;

  /// Normalizes one raw row laid out per `input`.
  std::vector<double> apply_row(std::span<const double> raw) const;
  void apply_row(std::span<const double> raw, std::span<double> out) const;
};

/// Throws Error(EmptyTrainingSet) for zero rows.
NormalizationStats fit_normalizer(const FeatureMatrix& x);
FeatureMatrix apply_normalizer(const FeatureMatrix& x, const NormalizationStats& stats);

}  // namespace botwatch
