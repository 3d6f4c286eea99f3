#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "botwatch/detectors.hpp"
#include "botwatch/features.hpp"
#include "botwatch/normalizer.hpp"

namespace botwatch {

/// How raw traffic is turned into rows; stored so captures can be scored
/// with the settings the model was trained under.
struct ExtractionSettings {
  TrafficMode mode = TrafficMode::UniFlow;
  std::optional<double> tw_seconds;
  double idle_timeout = 15.0;
};

inline constexpr int kModelFormatVersion = 1;

/// A trained detector with everything needed to score raw feature rows.
struct DetectorModel {
  DetectorKind kind = DetectorKind::IsolationForest;
  ParamMap params;
  std::unique_ptr<Detector> detector;
  double threshold = 0.0;
  double target_fpr = 0.0;
  NormalizationStats normalizer;  ///< input manifest = raw columns consumed
  ExtractionSettings extraction;

  const FeatureManifest& manifest() const noexcept { return normalizer.input; }

  /// Score of one raw row laid out per manifest().
  double score_raw(std::span<const double> raw) const;
  /// Scores every row of `x` after projecting it onto manifest().
  std::vector<double> score_matrix(const FeatureMatrix& x) const;
};

/// Fits normalizer and detector on benign rows, then calibrates the
/// threshold. Missing params take the kind's defaults. The returned model is
/// fit on every row; its threshold is the larger of the target quantile of its
/// own training scores and of 5-fold out-of-fold scores (folds need at least
/// kMinCalibrationScores rows, otherwise only the first applies).
inline constexpr std::size_t kCalibrationFolds = 5;

DetectorModel train_model(const FeatureMatrix& benign, DetectorKind kind, const ParamMap& params,
                          double target_fpr, const ExtractionSettings& extraction,
                          std::uint64_t seed);

nlohmann::json model_to_json(const DetectorModel& m);
DetectorModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const DetectorModel& m);
DetectorModel load_model(const std::filesystem::path& path);

}  // namespace botwatch
