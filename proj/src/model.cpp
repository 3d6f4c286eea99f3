#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "botwatch/error.hpp"
#include "botwatch/model.hpp"
#include "botwatch/threshold.hpp"

namespace botwatch {

double DetectorModel::score_raw(std::span<const double> raw) const {
  return detector->score(normalizer.apply_row(raw));
}

std::vector<double> DetectorModel::score_matrix(const FeatureMatrix& x) const {
  if (x.manifest.mode() != manifest().mode()) {
    fail(ErrorCode::ManifestMismatch, "rows are " + to_string(x.manifest.mode()) + " but the model expects " +
                                          to_string(manifest().mode()));
  }
  const FeatureMatrix projected = x.manifest == manifest() ? x : x.project(manifest());
  std::vector<double> out(projected.values.rows());
  std::vector<double> norm(normalizer.retained_index.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    normalizer.apply_row(projected.values.row(r), norm);
    out[r] = detector->score(norm);
  }
  return out;
}

DetectorModel train_model(const FeatureMatrix& benign, DetectorKind kind, const ParamMap& params,
                          double target_fpr, const ExtractionSettings& extraction,
                          std::uint64_t seed) {
  const std::size_t n = benign.values.rows();
  if (n == 0) fail(ErrorCode::EmptyTrainingSet, "no training rows");
  if (n < kMinCalibrationScores) {
    fail(ErrorCode::TooFewScores, "training needs at least " + std::to_string(kMinCalibrationScores) +
                                      " rows for calibration, got " + std::to_string(n));
  }

  DetectorModel m;
  m.kind = kind;
  m.target_fpr = target_fpr;
  m.extraction = extraction;

  auto fit_on = [&](const std::vector<std::size_t>& rows, DetectorModel& into) {
    FeatureMatrix part{benign.manifest, benign.values.select_rows(rows), {}};
    into.normalizer = fit_normalizer(part);
    if (into.normalizer.retained.size() == 0) {
      fail(ErrorCode::ZeroVariance, "every feature is constant on the training rows");
    }
    const FeatureMatrix norm = apply_normalizer(part, into.normalizer);
    into.params = default_params(kind, norm.values.cols());
    for (const auto& [k, v] : params) into.params[k] = v;
    into.detector = fit_detector(kind, norm.values, into.params);
  };

  std::vector<std::size_t> every(n);
  std::iota(every.begin(), every.end(), 0);
  fit_on(every, m);
  FeatureMatrix all{benign.manifest, benign.values, {}};
  m.threshold = calibrate_threshold(m.score_matrix(all), target_fpr);

  // out-of-fold scores: each row scored by a model that never saw it
  if (n / kCalibrationFolds >= kMinCalibrationScores) {
    std::vector<std::size_t> perm = every;
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> oof(n);
    for (std::size_t f = 0; f < kCalibrationFolds; ++f) {
      std::vector<std::size_t> in, out;
      for (std::size_t i = 0; i < n; ++i) (i % kCalibrationFolds == f ? out : in).push_back(perm[i]);
      std::sort(in.begin(), in.end());
      std::sort(out.begin(), out.end());
      DetectorModel fold;
      fold.kind = kind;
      fit_on(in, fold);
      const auto s = fold.score_matrix({benign.manifest, benign.values.select_rows(out), {}});
      for (std::size_t i = 0; i < out.size(); ++i) oof[out[i]] = s[i];
    }
    m.threshold = std::max(m.threshold, calibrate_threshold(oof, target_fpr));
  }
  return m;
}

namespace {

nlohmann::json manifest_json(const FeatureManifest& m) {
  return {{"mode", to_string(m.mode())}, {"hash", m.hash()}, {"names", m.names()}};
}

FeatureManifest manifest_from(const nlohmann::json& j) {
  auto m = manifest_from_names(parse_traffic_mode(j.at("mode").get<std::string>()),
                               j.at("names").get<std::vector<std::string>>());
  if (j.contains("hash") && j["hash"].get<std::string>() != m.hash()) {
    fail(ErrorCode::ManifestMismatch, "model manifest hash does not match its column names");
  }
  return m;
}

}  // namespace

nlohmann::json model_to_json(const DetectorModel& m) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : m.params) params[k] = v;
  nlohmann::json extraction = {{"mode", to_string(m.extraction.mode)},
                               {"idle_timeout", m.extraction.idle_timeout}};
  extraction["tw"] = m.extraction.tw_seconds ? nlohmann::json(*m.extraction.tw_seconds) : nlohmann::json();
  const auto& nz = m.normalizer;
  return {{"format", "botwatch-model"},
          {"version", kModelFormatVersion},
          {"kind", to_string(m.kind)},
          {"params", params},
          {"threshold", m.threshold},
          {"target_fpr", m.target_fpr},
          {"extraction", extraction},
          {"manifest", manifest_json(nz.input)},
          {"normalizer",
           {{"retained", nz.retained.names()},
            {"retained_index", nz.retained_index},
            {"mean", nz.mean},
            {"stddev", nz.stddev},
            {"dropped", nz.dropped}}},
          {"detector", m.detector->to_json()}};
}

DetectorModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "botwatch-model") fail(ErrorCode::ModelFormat, "not a botwatch model file");
    const int version = j.at("version").get<int>();
    if (version > kModelFormatVersion) {
      fail(ErrorCode::ModelFormat, "model format version " + std::to_string(version) + " is newer than supported");
    }
    DetectorModel m;
    m.kind = parse_detector_kind(j.at("kind").get<std::string>());
    for (const auto& [k, v] : j.at("params").items()) m.params[k] = v.get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.target_fpr = j.value("target_fpr", 0.0);
    const auto& ex = j.at("extraction");
    m.extraction.mode = parse_traffic_mode(ex.at("mode").get<std::string>());
    m.extraction.idle_timeout = ex.at("idle_timeout").get<double>();
    if (ex.contains("tw") && !ex["tw"].is_null()) m.extraction.tw_seconds = ex["tw"].get<double>();

    auto& nz = m.normalizer;
    nz.input = manifest_from(j.at("manifest"));
    const auto& jn = j.at("normalizer");
    nz.retained_index = jn.at("retained_index").get<std::vector<std::size_t>>();
    nz.mean = jn.at("mean").get<std::vector<double>>();
    nz.stddev = jn.at("stddev").get<std::vector<double>>();
    nz.dropped = jn.value("dropped", std::vector<std::string>{});
    nz.retained = manifest_from_names(nz.input.mode(), jn.at("retained").get<std::vector<std::string>>());
    if (nz.mean.size() != nz.retained_index.size() || nz.stddev.size() != nz.retained_index.size() ||
        nz.retained.size() != nz.retained_index.size()) {
      fail(ErrorCode::ModelFormat, "normalizer arrays disagree in length");
    }
    for (auto i : nz.retained_index) {
      if (i >= nz.input.size()) fail(ErrorCode::ModelFormat, "normalizer column index out of range");
    }
    m.detector = detector_from_json(m.kind, j.at("detector"));
    if (m.detector->dims() != nz.retained_index.size()) {
      fail(ErrorCode::ModelFormat, "detector width does not match the normalizer");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ModelFormat, std::string("model file malformed: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const DetectorModel& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << model_to_json(m).dump(1) << '\n';
  if (!out) fail(ErrorCode::IOError, "write failed on '" + path.string() + "'");
}

DetectorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IOError, "cannot open model '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ModelFormat, "model '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace botwatch
