#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "botwatch/detectors.hpp"

namespace botwatch {

/// Sampling range for one hyperparameter. Non-empty `choices` take
/// precedence over [lo, hi].
struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  bool log_scale = false;
  bool integer = false;
  std::vector<double> choices;
};

struct SearchSpace {
  std::map<std::string, ParamRange> ranges;
  ParamMap fixed;  ///< passed through unchanged
};

SearchSpace default_search_space(DetectorKind kind, std::size_t dims);

struct SearchOptions {
  std::size_t folds = 5;
  std::size_t budget = 20;
  double target_fpr = 0.05;
  std::uint64_t seed = 1;       ///< configuration sampling
  std::uint64_t fold_seed = 17;  ///< fold assignment
  /// Labeled anomalies; when present the criterion becomes mean AUC.
  const Matrix* anomalies = nullptr;
};

struct CandidateReport {
  ParamMap params;
  std::vector<double> fold_fpr;
  std::vector<double> fold_auc;  ///< empty without anomalies
  double mean_fpr = 0.0;
  double fpr_variance = 0.0;
  std::optional<double> mean_auc;
  std::string failure;  ///< non-empty when a fold failed to train
};

struct SearchResult {
  std::size_t best = 0;
  std::vector<CandidateReport> candidates;

  const CandidateReport& best_candidate() const { return candidates.at(best); }
};

/// Samples `budget` configurations and cross-validates each on benign rows.
/// Selection: lowest mean held-out FPR at the in-fold calibrated threshold,
/// ties to lower variance of the fold FPRs; highest mean AUC when anomalies
/// are supplied. Throws Error(EmptySpace).
SearchResult random_search(DetectorKind kind, const SearchSpace& space, const Matrix& benign,
                           const SearchOptions& opt);

}  // namespace botwatch
