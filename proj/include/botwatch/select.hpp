#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "botwatch/features.hpp"
#include "botwatch/matrix.hpp"

namespace botwatch {

enum class Aggregation { Mean, Majority, Borda };
std::string to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view text);

struct SelectionConfig {
  double sigma = 1.0;  ///< RBF bandwidth on z-scored data
  Aggregation aggregation = Aggregation::Mean;
  std::optional<std::size_t> keep;      ///< number of features to keep
  std::optional<double> keep_fraction;  ///< used when `keep` is unset
  std::size_t max_similarity_rows = 2000;
  std::uint64_t seed = 7;
};

/// S_ij = exp(-||x_i - x_j||^2 / (2 sigma^2)). Throws Error(NonPositiveSigma).
Matrix rbf_similarity(const Matrix& x, double sigma);

/// Smoothness of `feature` on the graph S under the normalized Laplacian:
/// f^T L f with f = D^{1/2} x / ||D^{1/2} x||. Lower is smoother.
double spectral_score(std::span<const double> feature, const Matrix& similarity);

/// -[s log2 s + (1-s) log2 (1-s)] with 0 log 0 = 0.
double pair_entropy(double s);
/// Sum of pair_entropy over all ordered (i, j).
double similarity_entropy(const Matrix& similarity);
/// Entropy of the RBF similarity built from this one feature.
double information_score(std::span<const double> feature, double sigma);

double pearson(std::span<const double> a, std::span<const double> b);
/// Sum over j != i of |pearson(f_i, f_j)| for every column i.
/// Throws Error(ZeroVariance) on a constant column.
std::vector<double> pearson_redundancy(const Matrix& x);

/// Mean absolute deviation from the column mean.
double intra_class_distance(std::span<const double> feature);
/// Q3 - Q1, linear interpolation. Throws Error(TooFewSamples) for n < 4.
double iqr_score(std::span<const double> feature);

/// 1-based ranks, ascending score; ties keep input order.
std::vector<std::size_t> rank_ascending(std::span<const double> scores);

struct RankedFeatureList {
  std::vector<std::string> features;
  std::vector<std::string> criteria;
  std::vector<std::vector<double>> scores;       ///< [criterion][feature]
  std::vector<std::vector<std::size_t>> ranks;   ///< [criterion][feature]
  Aggregation method = Aggregation::Mean;
  std::vector<double> aggregate;                 ///< mean/median rank or Borda points
  std::vector<std::size_t> aggregated_rank;      ///< 1-based, per feature
  std::vector<std::size_t> order;                ///< feature indices, best first
  std::vector<std::string> selected;             ///< in manifest order
};

/// Combines per-criterion rank lists (each a permutation of 1..m). Throws
/// Error(RankListMismatch).
RankedFeatureList aggregate_ranks(const std::vector<std::vector<std::size_t>>& ranks,
                                  const std::vector<std::string>& features, Aggregation method,
                                  std::size_t keep);

/// Runs the five criteria on benign, normalized data and aggregates.
RankedFeatureList select_features(const FeatureMatrix& normalized, const SelectionConfig& cfg);

/// CSV: feature, five scores, five ranks, aggregate, aggregated_rank, selected.
void write_ranking_csv(const std::filesystem::path& path, const RankedFeatureList& r);

}  // namespace botwatch
