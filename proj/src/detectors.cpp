#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

std::string to_string(DetectorKind k) {
  switch (k) {
    case DetectorKind::IsolationForest: return "if";
    case DetectorKind::EllipticEnvelope: return "ee";
    case DetectorKind::LocalOutlierFactor: return "lof";
    case DetectorKind::OneClassSvm: return "osvm";
    case DetectorKind::Autoencoder: return "ae";
  }
  return "?";
}

DetectorKind parse_detector_kind(std::string_view text) {
  std::string t(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto k : kAllDetectorKinds) {
    if (to_string(k) == t) return k;
  }
  fail(ErrorCode::InvalidArgument, "unknown detector '" + std::string(text) + "' (if|ee|lof|osvm|ae)");
}

std::vector<double> Detector::score_all(const Matrix& x) const {
  if (x.cols() != dims()) {
    fail(ErrorCode::ManifestMismatch, "detector expects " + std::to_string(dims()) + " columns, got " +
                                          std::to_string(x.cols()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = score(x.row(r));
  return out;
}

ParamMap default_params(DetectorKind kind, std::size_t dims) {
  switch (kind) {
    case DetectorKind::IsolationForest: {
      IsolationForestParams p;
      return {{"n_trees", double(p.n_trees)}, {"subsample_size", double(p.subsample)}, {"seed", double(p.seed)}};
    }
    case DetectorKind::EllipticEnvelope:
      return {{"ridge", EllipticEnvelopeParams{}.ridge}};
    case DetectorKind::LocalOutlierFactor: {
      LofParams p;
      return {{"k", double(p.k)}, {"max_train", double(p.max_train)}, {"seed", double(p.seed)}};
    }
    case DetectorKind::OneClassSvm: {
      OneClassSvmParams p;
      return {{"nu", p.nu},
              {"gamma", 1.0 / double(std::max<std::size_t>(dims, 1))},
              {"tolerance", p.tolerance},
              {"max_train", double(p.max_train)},
              {"seed", double(p.seed)}};
    }
    case DetectorKind::Autoencoder: {
      AutoencoderParams p;
      return {{"epochs", double(p.epochs)},
              {"learning_rate", p.learning_rate},
              {"batch_size", double(p.batch_size)},
              {"optimizer", 1.0},
              {"seed", double(p.seed)}};
    }
  }
  return {};
}

namespace {

class ParamReader {
 public:
  ParamReader(DetectorKind kind, const ParamMap& params) : kind_(kind), params_(params) {}

  double real(const std::string& name, double fallback) {
    known_.insert(name);
    auto it = params_.find(name);
    if (it == params_.end()) return fallback;
    if (!std::isfinite(it->second)) bad(name, "must be finite");
    return it->second;
  }

  std::size_t count(const std::string& name, std::size_t fallback) {
    const double v = real(name, double(fallback));
    if (v < 0.0) bad(name, "must be non-negative");
    return static_cast<std::size_t>(std::llround(v));
  }

  std::uint64_t seed(std::uint64_t fallback) {
    const double v = real("seed", double(fallback));
    if (v < 0.0) bad("seed", "must be non-negative");
    return static_cast<std::uint64_t>(std::llround(v));
  }

  void finish() const {
    for (const auto& [name, value] : params_) {
      if (!known_.count(name)) {
        fail(ErrorCode::InvalidArgument, "unknown parameter '" + name + "' for detector " + to_string(kind_));
      }
    }
  }

 private:
  [[noreturn]] void bad(const std::string& name, const std::string& why) const {
    fail(ErrorCode::InvalidArgument, to_string(kind_) + " parameter " + name + " " + why);
  }

  DetectorKind kind_;
  const ParamMap& params_;
  std::set<std::string> known_;
};

}  // namespace

std::unique_ptr<Detector> fit_detector(DetectorKind kind, const Matrix& x, const ParamMap& params) {
  ParamReader r(kind, params);
  switch (kind) {
    case DetectorKind::IsolationForest: {
      IsolationForestParams p;
      p.n_trees = r.count("n_trees", p.n_trees);
      p.subsample = r.count("subsample_size", p.subsample);
      p.seed = r.seed(p.seed);
      r.finish();
      if (p.n_trees == 0) fail(ErrorCode::InvalidArgument, "n_trees must be positive");
      return std::make_unique<IsolationForest>(IsolationForest::fit(x, p));
    }
    case DetectorKind::EllipticEnvelope: {
      EllipticEnvelopeParams p;
      p.ridge = r.real("ridge", p.ridge);
      r.finish();
      if (p.ridge < 0.0) fail(ErrorCode::InvalidArgument, "ridge must be non-negative");
      return std::make_unique<EllipticEnvelope>(EllipticEnvelope::fit(x, p));
    }
    case DetectorKind::LocalOutlierFactor: {
      LofParams p;
      p.k = r.count("k", p.k);
      p.max_train = r.count("max_train", p.max_train);
      p.seed = r.seed(p.seed);
      r.finish();
      return std::make_unique<LocalOutlierFactor>(LocalOutlierFactor::fit(x, p));
    }
    case DetectorKind::OneClassSvm: {
      OneClassSvmParams p;
      p.nu = r.real("nu", p.nu);
      p.gamma = r.real("gamma", p.gamma);
      p.tolerance = r.real("tolerance", p.tolerance);
      p.max_iterations = r.count("max_iterations", p.max_iterations);
      p.max_train = r.count("max_train", p.max_train);
      p.seed = r.seed(p.seed);
      r.finish();
      return std::make_unique<OneClassSvm>(OneClassSvm::fit(x, p));
    }
    case DetectorKind::Autoencoder: {
      AutoencoderParams p;
      p.epochs = r.count("epochs", p.epochs);
      p.learning_rate = r.real("learning_rate", p.learning_rate);
      p.batch_size = r.count("batch_size", p.batch_size);
      const double opt = r.real("optimizer", 1.0);
      if (opt != 0.0 && opt != 1.0) fail(ErrorCode::InvalidArgument, "optimizer must be 0 (sgd) or 1 (adam)");
      p.optimizer = opt == 0.0 ? Optimizer::Sgd : Optimizer::Adam;
      p.seed = r.seed(p.seed);
      r.finish();
      return std::make_unique<Autoencoder>(Autoencoder::fit(x, p));
    }
  }
  fail(ErrorCode::InvalidArgument, "unknown detector kind");
}

std::unique_ptr<Detector> detector_from_json(DetectorKind kind, const nlohmann::json& j) {
  try {
    switch (kind) {
      case DetectorKind::IsolationForest:
        return std::make_unique<IsolationForest>(IsolationForest::from_json(j));
      case DetectorKind::EllipticEnvelope:
        return std::make_unique<EllipticEnvelope>(EllipticEnvelope::from_json(j));
      case DetectorKind::LocalOutlierFactor:
        return std::make_unique<LocalOutlierFactor>(LocalOutlierFactor::from_json(j));
      case DetectorKind::OneClassSvm:
        return std::make_unique<OneClassSvm>(OneClassSvm::from_json(j));
      case DetectorKind::Autoencoder:
        return std::make_unique<Autoencoder>(Autoencoder::from_json(j));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ModelFormat, std::string("detector parameters malformed: ") + e.what());
  }
  fail(ErrorCode::ModelFormat, "unknown detector kind");
}

}  // namespace botwatch
