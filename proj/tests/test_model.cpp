#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "botwatch/error.hpp"
#include "botwatch/model.hpp"
#include "botwatch/search.hpp"
#include "botwatch/threshold.hpp"
#include "fixtures.hpp"

using namespace botwatch;

namespace {

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IOError;
}

FeatureMatrix benign_matrix(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  FeatureMatrix fm;
  fm.manifest = catalog(TrafficMode::UniFlow).subset({"pkt_count", "byte_count", "iat_mean", "ttl_mean", "duration"});
  fm.values = fixtures::gaussian(n, 5, rng, 3.0, 10.0);
  return fm;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ParamMap fast_params(DetectorKind k) {
  if (k == DetectorKind::Autoencoder) return {{"epochs", 10}};
  return {};
}

}  // namespace

TEST_SUITE("threshold") {

TEST_CASE("quantile thresholds") {
  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  const double t = calibrate_threshold(s, 0.05);
  CHECK(t > 95.0);
  CHECK(t < 96.0);
  CHECK(calibrate_threshold(s, 0.0) == 100.0);
  CHECK(error_of([] { calibrate_threshold(std::vector<double>(49, 1.0), 0.05); }) == ErrorCode::TooFewScores);
  CHECK(flag(2.0, 1.0));
  CHECK_FALSE(flag(1.0, 1.0));
}

TEST_CASE("re-flagging validation scores stays within target + 1/n") {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> d(0, 1);
  for (double fpr : {0.01, 0.02, 0.05, 0.1, 0.3}) {
    for (std::size_t n : {50u, 77u, 500u, 1999u}) {
      std::vector<double> s(n);
      for (auto& v : s) v = d(rng);
      if (n == 77) std::fill(s.begin(), s.begin() + 20, 1.0);
      const double t = calibrate_threshold(s, fpr);
      std::size_t flagged = 0;
      for (double v : s) flagged += flag(v, t);
      CHECK(static_cast<double>(flagged) / static_cast<double>(n) <= fpr + 1.0 / static_cast<double>(n));
    }
  }
}

}  // TEST_SUITE

TEST_SUITE("search") {

TEST_CASE("budget 1 returns its configuration with a five-fold report") {
  const auto x = benign_matrix(300, 1).values;
  SearchSpace sp;
  sp.ranges["ridge"] = {1e-4, 1e-4, false, false, {}};
  SearchOptions o;
  o.budget = 1;
  const auto r = random_search(DetectorKind::EllipticEnvelope, sp, x, o);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.best == 0);
  CHECK(r.best_candidate().params.at("ridge") == 1e-4);
  CHECK(r.best_candidate().fold_fpr.size() == 5);
  CHECK(r.best_candidate().failure.empty());
}

TEST_CASE("duplicate configurations give identical fold metrics") {
  const auto x = benign_matrix(300, 2).values;
  SearchSpace sp;
  sp.ranges["n_trees"] = {0, 0, false, true, {40}};
  SearchOptions o;
  o.budget = 3;
  const auto r = random_search(DetectorKind::IsolationForest, sp, x, o);
  REQUIRE(r.candidates.size() == 3);
  for (const auto& c : r.candidates) {
    CHECK(c.params == r.candidates[0].params);
    CHECK(c.fold_fpr == r.candidates[0].fold_fpr);
  }
}

TEST_CASE("known-good gamma beats a degenerate one") {
  std::mt19937_64 rng(4);
  const Matrix benign = fixtures::gaussian(300, 2, rng);
  Matrix anomalies = fixtures::gaussian(40, 2, rng, 0.5, 6.0);
  SearchSpace sp;
  sp.ranges["gamma"] = {0, 0, false, false, {1e4, 0.5}};
  sp.fixed["nu"] = 0.05;
  SearchOptions o;
  o.budget = 8;
  auto check_choice = [&](const SearchResult& r) {
    bool saw_bad = false;
    for (const auto& c : r.candidates) saw_bad |= c.params.at("gamma") == 1e4;
    REQUIRE(saw_bad);
    CHECK(r.best_candidate().params.at("gamma") == 0.5);
  };
  check_choice(random_search(DetectorKind::OneClassSvm, sp, benign, o));
  o.anomalies = &anomalies;
  const auto with = random_search(DetectorKind::OneClassSvm, sp, benign, o);
  check_choice(with);
  CHECK(with.best_candidate().mean_auc.value() > 0.95);
}

TEST_CASE("empty spaces") {
  const auto x = benign_matrix(100, 5).values;
  SearchOptions o;
  CHECK(error_of([&] { random_search(DetectorKind::IsolationForest, SearchSpace{}, x, o); }) == ErrorCode::EmptySpace);
  o.budget = 0;
  CHECK(error_of([&] { random_search(DetectorKind::IsolationForest, default_search_space(DetectorKind::IsolationForest, 5), x, o); }) ==
        ErrorCode::EmptySpace);
  SearchSpace inverted;
  inverted.ranges["k"] = {10, 5, false, true, {}};
  o.budget = 1;
  CHECK(error_of([&] { random_search(DetectorKind::LocalOutlierFactor, inverted, x, o); }) == ErrorCode::EmptySpace);
}

TEST_CASE("default spaces sample inside their ranges") {
  const auto x = benign_matrix(250, 6).values;
  for (auto k : {DetectorKind::EllipticEnvelope, DetectorKind::LocalOutlierFactor}) {
    const auto sp = default_search_space(k, 5);
    SearchOptions o;
    o.budget = 4;
    const auto r = random_search(k, sp, x, o);
    for (const auto& c : r.candidates) {
      for (const auto& [name, range] : sp.ranges) {
        const double v = c.params.at(name);
        CHECK(v >= range.lo);
        CHECK(v <= range.hi);
        if (range.integer) CHECK(v == std::round(v));
      }
    }
  }
}

}  // TEST_SUITE

TEST_SUITE("model") {

TEST_CASE("train then re-score the training rows") {
  const auto fm = benign_matrix(600, 7);
  for (auto kind : kAllDetectorKinds) {
    const auto m = train_model(fm, kind, fast_params(kind), 0.02, {}, 11);
    const auto s = m.score_matrix(fm);
    std::size_t flagged = 0;
    for (double v : s) flagged += flag(v, m.threshold);
    CHECK_MESSAGE(static_cast<double>(flagged) / 600.0 <= 0.02 + 1.0 / 600.0, to_string(kind));
  }
}

TEST_CASE("persistence round trip is bit-identical on 1000 probes") {
  const auto fm = benign_matrix(400, 8);
  std::mt19937_64 rng(9);
  const Matrix probes = fixtures::gaussian(1000, 5, rng, 6.0, 10.0);
  for (auto kind : kAllDetectorKinds) {
    const auto m = train_model(fm, kind, fast_params(kind), 0.05, {TrafficMode::UniFlow, 1.0, 15.0}, 3);
    const auto path = fixtures::temp_path("model_" + to_string(kind) + ".json");
    save_model(path, m);
    const auto back = load_model(path);
    CHECK(back.threshold == m.threshold);
    CHECK(back.kind == kind);
    CHECK(back.extraction.tw_seconds == std::optional<double>(1.0));
    CHECK(back.manifest() == m.manifest());
    std::size_t same = 0;
    for (std::size_t i = 0; i < probes.rows(); ++i) same += back.score_raw(probes.row(i)) == m.score_raw(probes.row(i));
    CHECK_MESSAGE(same == 1000, to_string(kind));
    const auto again = fixtures::temp_path("model_again.json");
    save_model(again, back);
    CHECK(slurp(again) == slurp(path));
  }
}

TEST_CASE("training is deterministic under seed") {
  const auto fm = benign_matrix(300, 10);
  for (auto kind : kAllDetectorKinds) {
    const auto a = model_to_json(train_model(fm, kind, fast_params(kind), 0.05, {}, 4)).dump();
    const auto b = model_to_json(train_model(fm, kind, fast_params(kind), 0.05, {}, 4)).dump();
    CHECK_MESSAGE(a == b, to_string(kind));
  }
}

TEST_CASE("model file validation") {
  const auto fm = benign_matrix(300, 12);
  const auto m = train_model(fm, DetectorKind::EllipticEnvelope, {}, 0.05, {}, 1);
  auto j = model_to_json(m);
  j["comment"] = "extra fields are ignored";
  CHECK_NOTHROW(model_from_json(j));
  auto newer = j;
  newer["version"] = kModelFormatVersion + 1;
  CHECK(error_of([&] { model_from_json(newer); }) == ErrorCode::ModelFormat);
  auto tampered = j;
  tampered["manifest"]["names"][0] = "syn_count";
  CHECK(error_of([&] { model_from_json(tampered); }) == ErrorCode::ManifestMismatch);
  auto wrong = j;
  wrong["format"] = "other";
  CHECK(error_of([&] { model_from_json(wrong); }) == ErrorCode::ModelFormat);
}

TEST_CASE("scoring a matrix projects onto the model manifest") {
  const auto fm = benign_matrix(300, 13);
  const auto m = train_model(fm, DetectorKind::EllipticEnvelope, {}, 0.05, {}, 1);
  FeatureMatrix wide;
  wide.manifest = catalog(TrafficMode::UniFlow);
  wide.values = Matrix(3, wide.manifest.size(), 0.0);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 5; ++c) wide.values(r, *wide.manifest.index_of(fm.manifest[c].name)) = fm.values(r, c);
  const auto a = m.score_matrix(wide);
  for (std::size_t r = 0; r < 3; ++r) CHECK(a[r] == m.score_raw(fm.values.row(r)));
  FeatureMatrix narrow;
  narrow.manifest = catalog(TrafficMode::UniFlow).subset({"pkt_count"});
  narrow.values = Matrix(1, 1);
  CHECK(error_of([&] { m.score_matrix(narrow); }) == ErrorCode::ManifestMismatch);
}

}  // TEST_SUITE
