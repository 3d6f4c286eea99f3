#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "botwatch/error.hpp"
#include "botwatch/metrics.hpp"
#include "botwatch/search.hpp"
#include "botwatch/stats.hpp"
#include "botwatch/threshold.hpp"

namespace botwatch {

SearchSpace default_search_space(DetectorKind kind, std::size_t dims) {
  const double d = static_cast<double>(std::max<std::size_t>(dims, 1));
  SearchSpace s;
  switch (kind) {
    case DetectorKind::IsolationForest:
      s.ranges["n_trees"] = {50, 200, false, true, {}};
      s.ranges["subsample_size"] = {64, 512, true, true, {}};
      break;
    case DetectorKind::EllipticEnvelope:
      s.ranges["ridge"] = {1e-6, 1e-1, true, false, {}};
      break;
    case DetectorKind::LocalOutlierFactor:
      s.ranges["k"] = {5, 50, false, true, {}};
      break;
    case DetectorKind::OneClassSvm:
      s.ranges["nu"] = {0.01, 0.2, true, false, {}};
      s.ranges["gamma"] = {0.01 / d, 10.0 / d, true, false, {}};
      break;
    case DetectorKind::Autoencoder:
      s.ranges["learning_rate"] = {1e-4, 1e-2, true, false, {}};
      s.ranges["epochs"] = {30, 150, false, true, {}};
      break;
  }
  return s;
}

namespace {

double sample(const ParamRange& r, std::mt19937_64& rng) {
  if (!r.choices.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, r.choices.size() - 1);
    return r.choices[pick(rng)];
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = u(rng);
  double v;
  if (r.log_scale) {
    v = std::exp(std::log(r.lo) + t * (std::log(r.hi) - std::log(r.lo)));
  } else {
    v = r.lo + t * (r.hi - r.lo);
  }
  if (r.integer) v = std::clamp(std::round(v), std::ceil(r.lo), std::floor(r.hi));
  return v;
}

void validate(const std::string& name, const ParamRange& r) {
  if (!r.choices.empty()) return;
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi)) || r.lo > r.hi) {
    fail(ErrorCode::EmptySpace, "parameter " + name + " has an empty range");
  }
  if (r.log_scale && r.lo <= 0.0) fail(ErrorCode::EmptySpace, "log-scale range for " + name + " must be positive");
  if (r.integer && std::ceil(r.lo) > std::floor(r.hi)) {
    fail(ErrorCode::EmptySpace, "integer range for " + name + " contains no integer");
  }
}

}  // namespace

SearchResult random_search(DetectorKind kind, const SearchSpace& space, const Matrix& benign,
                           const SearchOptions& opt) {
  if (space.ranges.empty() && space.fixed.empty()) fail(ErrorCode::EmptySpace, "search space is empty");
  for (const auto& [name, r] : space.ranges) validate(name, r);
  if (opt.budget == 0) fail(ErrorCode::EmptySpace, "search budget is 0");
  if (opt.folds < 2) fail(ErrorCode::InvalidArgument, "cross-validation needs at least 2 folds");
  if (benign.rows() < opt.folds) fail(ErrorCode::TooFewSamples, "fewer benign rows than folds");

  // Fold assignment depends only on the fold seed.
  std::vector<std::size_t> perm(benign.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 fold_rng(opt.fold_seed);
  std::shuffle(perm.begin(), perm.end(), fold_rng);
  std::vector<std::vector<std::size_t>> fold_rows(opt.folds);
  for (std::size_t i = 0; i < perm.size(); ++i) fold_rows[i % opt.folds].push_back(perm[i]);
  for (auto& f : fold_rows) std::sort(f.begin(), f.end());

  std::mt19937_64 rng(opt.seed);
  SearchResult result;
  for (std::size_t c = 0; c < opt.budget; ++c) {
    CandidateReport rep;
    rep.params = space.fixed;
    for (const auto& [name, r] : space.ranges) rep.params[name] = sample(r, rng);

    try {
      for (std::size_t f = 0; f < opt.folds; ++f) {
        std::vector<std::size_t> train_idx;
        for (std::size_t g = 0; g < opt.folds; ++g) {
          if (g != f) train_idx.insert(train_idx.end(), fold_rows[g].begin(), fold_rows[g].end());
        }
        std::sort(train_idx.begin(), train_idx.end());
        const Matrix train = benign.select_rows(train_idx);
        const Matrix held = benign.select_rows(fold_rows[f]);
        auto det = fit_detector(kind, train, rep.params);
        const double theta = calibrate_threshold(det->score_all(train), opt.target_fpr);
        const auto held_scores = det->score_all(held);
        std::size_t flagged = 0;
        for (double s : held_scores) flagged += flag(s, theta);
        rep.fold_fpr.push_back(static_cast<double>(flagged) / static_cast<double>(held_scores.size()));
        if (opt.anomalies != nullptr && opt.anomalies->rows() > 0) {
          auto scores = held_scores;
          std::vector<bool> positive(scores.size(), false);
          for (double s : det->score_all(*opt.anomalies)) {
            scores.push_back(s);
            positive.push_back(true);
          }
          rep.fold_auc.push_back(auc(scores, positive));
        }
      }
      rep.mean_fpr = stats::mean(rep.fold_fpr);
      rep.fpr_variance = stats::variance(rep.fold_fpr);
      if (!rep.fold_auc.empty()) rep.mean_auc = stats::mean(rep.fold_auc);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::TooFewScores) throw;
      rep.failure = std::string(to_string(e.code())) + ": " + e.what();
      rep.fold_fpr.clear();
      rep.fold_auc.clear();
    }
    result.candidates.push_back(std::move(rep));
  }

  const bool by_auc = opt.anomalies != nullptr && opt.anomalies->rows() > 0;
  auto better = [&](const CandidateReport& a, const CandidateReport& b) {
    if (a.failure.empty() != b.failure.empty()) return a.failure.empty();
    if (!a.failure.empty()) return false;
    if (by_auc) return *a.mean_auc > *b.mean_auc;
    if (a.mean_fpr != b.mean_fpr) return a.mean_fpr < b.mean_fpr;
    return a.fpr_variance < b.fpr_variance;
  };
  for (std::size_t c = 1; c < result.candidates.size(); ++c) {
    if (better(result.candidates[c], result.candidates[result.best])) result.best = c;
  }
  if (!result.best_candidate().failure.empty()) {
    fail(ErrorCode::NonConvergence, "no configuration trained successfully: " + result.best_candidate().failure);
  }
  return result;
}

}  // namespace botwatch
