#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"
#include "botwatch/stats.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

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

std::vector<std::vector<double>> kernel_of(const Matrix& x, double gamma) {
  std::vector<std::vector<double>> k(x.rows(), std::vector<double>(x.rows()));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.rows(); ++j) {
      double d2 = 0;
      for (std::size_t c = 0; c < x.cols(); ++c) d2 += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      k[i][j] = std::exp(-gamma * d2);
    }
  return k;
}

// Blob plus 5% far outliers; last rows are the outliers.
Matrix planted(std::mt19937_64& rng, std::size_t n, std::size_t d, std::size_t& n_out) {
  n_out = n / 20;
  Matrix x = fixtures::gaussian(n, d, rng);
  std::normal_distribution<double> g(0, 1);
  for (std::size_t i = n - n_out; i < n; ++i) {
    double norm = 0;
    for (std::size_t c = 0; c < d; ++c) norm += x(i, c) * x(i, c);
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < d; ++c) x(i, c) = x(i, c) / norm * 10.0;
  }
  return x;
}

}  // namespace

TEST_SUITE("detectors") {

TEST_CASE("isolation forest normalizer") {
  CHECK(average_path_length(2) == 1.0);
  CHECK(average_path_length(1) == 0.0);
  CHECK(average_path_length(0) == 0.0);
  // 2 H(255) - 2*255/256 computed by direct summation
  double h = 0;
  for (int i = 1; i <= 255; ++i) h += 1.0 / i;
  CHECK(average_path_length(256) == doctest::Approx(2 * h - 2.0 * 255 / 256).epsilon(1e-12));
  for (std::size_t n : {2u, 10u, 256u, 1000u}) CHECK(isolation_score(average_path_length(n), n) == 0.5);
}

TEST_CASE("isolation forest separates a planted outlier") {
  std::mt19937_64 rng(21);
  Matrix x = fixtures::gaussian(256, 4, rng);
  std::vector<double> far(4, 8.0);
  const auto m = IsolationForest::fit(x, {});
  const double s_far = m.score(far);
  for (std::size_t i = 0; i < x.rows(); ++i) CHECK(m.score(x.row(i)) < s_far);
  CHECK(error_of([] { IsolationForest::fit(Matrix(0, 3), {}); }) == ErrorCode::EmptyTraining);
}

TEST_CASE("isolation forest is deterministic under seed") {
  std::mt19937_64 rng(22);
  const Matrix x = fixtures::gaussian(300, 5, rng);
  IsolationForestParams p;
  p.seed = 9;
  CHECK(IsolationForest::fit(x, p).to_json().dump() == IsolationForest::fit(x, p).to_json().dump());
  p.seed = 10;
  CHECK(IsolationForest::fit(x, p).to_json().dump() != IsolationForest::fit(x, {}).to_json().dump());
}

TEST_CASE("elliptic envelope distances") {
  const auto one = EllipticEnvelope::from_moments({0.0}, Matrix(1, 1, 4.0));
  CHECK(one.score(std::vector<double>{2.0}) == doctest::Approx(1.0).epsilon(1e-15));
  Matrix eye(3, 3);
  for (int i = 0; i < 3; ++i) eye(i, i) = 1;
  const auto e = EllipticEnvelope::from_moments({1, 2, 3}, eye);
  CHECK(e.score(std::vector<double>{1, 2, 3}) == 0.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> q = {g(rng), g(rng), g(rng)};
    const double eu = std::sqrt((q[0] - 1) * (q[0] - 1) + (q[1] - 2) * (q[1] - 2) + (q[2] - 3) * (q[2] - 3));
    CHECK(std::abs(e.score(q) - eu) <= 1e-12);
  }
  const Matrix x = fixtures::gaussian(100, 3, rng, 2.0, 1.0);
  const auto fitted = EllipticEnvelope::fit(x, {});
  CHECK(fitted.score(fitted.mean()) == 0.0);
}

TEST_CASE("elliptic envelope is affine invariant without ridge") {
  std::mt19937_64 rng(6);
  const Matrix x = fixtures::gaussian(80, 3, rng);
  const double a[3][3] = {{2, 0.5, 0}, {0, 1, -0.3}, {0.2, 0, 3}};
  const double b[3] = {5, -1, 2};
  auto map = [&](std::span<const double> v) {
    std::vector<double> o(3);
    for (int i = 0; i < 3; ++i) {
      o[i] = b[i];
      for (int j = 0; j < 3; ++j) o[i] += a[i][j] * v[j];
    }
    return o;
  };
  Matrix y(80, 3);
  for (std::size_t i = 0; i < 80; ++i) {
    const auto o = map(x.row(i));
    std::copy(o.begin(), o.end(), y.row(i).begin());
  }
  EllipticEnvelopeParams p;
  p.ridge = 0;
  const auto mx = EllipticEnvelope::fit(x, p), my = EllipticEnvelope::fit(y, p);
  const Matrix q = fixtures::gaussian(20, 3, rng, 3.0);
  for (std::size_t i = 0; i < q.rows(); ++i)
    CHECK(my.score(map(q.row(i))) == doctest::Approx(mx.score(q.row(i))).epsilon(1e-8));
  Matrix flat(5, 3, 1.0);
  CHECK(error_of([&] { EllipticEnvelope::fit(flat, p); }) == ErrorCode::SingularCovariance);
  CHECK_NOTHROW(EllipticEnvelope::fit(flat, {}));
}

TEST_CASE("LOF matches the brute-force oracle") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 20 + rng() % 80, d = 1 + rng() % 5, k = 1 + rng() % 10;
    const Matrix x = fixtures::gaussian(n, d, rng);
    LofParams p;
    p.k = k;
    const auto m = LocalOutlierFactor::fit(x, p);
    const oracle::BruteLof o{x, k, kMinReachDistance};
    const Matrix q = fixtures::gaussian(5, d, rng, 2.0);
    for (std::size_t i = 0; i < q.rows(); ++i) CHECK(std::abs(m.score(q.row(i)) - o.score(q.row(i))) <= 1e-9);
  }
}

TEST_CASE("LOF on a grid, a far point and duplicates") {
  Matrix grid(0, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) grid.append_row(std::vector<double>{double(i), double(j)});
  LofParams p;
  p.k = 4;
  const auto m = LocalOutlierFactor::fit(grid, p);
  for (int i = 2; i < 8; ++i)
    for (int j = 2; j < 8; ++j) CHECK(std::abs(m.score(std::vector<double>{i + 0.0, j + 0.0}) - 1.0) <= 0.15);

  Matrix cluster(0, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cluster.append_row(std::vector<double>{double(i), double(j)});
  p.k = 3;
  const auto c = LocalOutlierFactor::fit(cluster, p);
  const std::vector<double> far = {1.0, 11.0};
  const double s = c.score(far);
  CHECK(s > 3.0);
  CHECK(s == doctest::Approx(oracle::BruteLof{cluster, 3, kMinReachDistance}.score(far)).epsilon(1e-12));

  const Matrix same(30, 3, 2.5);
  const auto dup = LocalOutlierFactor::fit(same, p);
  CHECK(dup.score(same.row(0)) == doctest::Approx(1.0));
  CHECK(error_of([&] {
          LofParams big;
          big.k = 30;
          LocalOutlierFactor::fit(same, big);
        }) == ErrorCode::KTooLarge);
}

TEST_CASE("OSVM dual matches the QP oracle on tiny instances") {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 3 + rng() % 10, d = 1 + rng() % 3;
    const Matrix x = fixtures::gaussian(n, d, rng);
    const double nu = 0.2 + 0.6 * static_cast<double>(rng() % 100) / 100.0;
    const double gamma = 0.5;
    const auto r = solve_one_class_dual(x, nu, gamma, 1e-10, 0, 1 << 20);
    const double c = 1.0 / (nu * static_cast<double>(n));
    double sum = 0;
    for (double a : r.alpha) {
      CHECK(a >= 0.0);
      CHECK(a <= c);
      sum += a;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-8);
    CHECK(std::abs(r.objective - oracle::qp_min(kernel_of(x, gamma), c)) <= 1e-6);
  }
}

TEST_CASE("OSVM nu-property and duplicated point") {
  std::mt19937_64 rng(42);
  const Matrix x = fixtures::gaussian(200, 2, rng);
  OneClassSvmParams p;
  p.nu = 0.1;
  const auto m = OneClassSvm::fit(x, p);
  std::size_t outside = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) outside += m.decision(x.row(i)) < 0;
  CHECK(static_cast<double>(outside) / 200.0 <= 0.1 + 1e-12);
  CHECK(static_cast<double>(m.support_count()) / 200.0 >= 0.1);
  double sum = 0;
  for (double a : m.coefficients()) sum += a;
  CHECK(std::abs(sum - 1.0) <= 1e-8);

  const Matrix dup(10, 3, 0.7);
  const auto d = OneClassSvm::fit(dup, p);
  CHECK(d.decision(dup.row(0)) >= -1e-12);
  CHECK(d.score(std::vector<double>{5, 5, 5}) > d.score(dup.row(0)));
}

TEST_CASE("OSVM non-convergence reports the violation") {
  std::mt19937_64 rng(43);
  const Matrix x = fixtures::gaussian(50, 2, rng);
  try {
    solve_one_class_dual(x, 0.1, 1.0, 1e-12, 1, 1 << 20);
    FAIL("expected NonConvergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonConvergence);
    CHECK(std::string(e.what()).find("KKT") != std::string::npos);
  }
}

TEST_CASE("autoencoder gradient matches central differences") {
  std::mt19937_64 rng(51);
  Autoencoder ae({3, 4, 2, 4, 3}, 7);
  const Matrix x = fixtures::gaussian(6, 3, rng);
  const auto grad = ae.gradient(x);
  auto theta = ae.parameters();
  REQUIRE(grad.size() == theta.size());
  const double h = 1e-5;
  double worst = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto tp = theta, tm = theta;
    tp[i] += h;
    tm[i] -= h;
    ae.set_parameters(tp);
    const double lp = ae.loss(x);
    ae.set_parameters(tm);
    const double lm = ae.loss(x);
    const double fd = (lp - lm) / (2 * h);
    const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, rel);
  }
  ae.set_parameters(theta);
  CHECK(worst <= 1e-4);
}

TEST_CASE("autoencoder architecture and perfect reconstruction") {
  CHECK(default_autoencoder_layers(8) == std::vector<std::size_t>{8, 4, 2, 4, 8});
  CHECK(default_autoencoder_layers(79) == std::vector<std::size_t>{79, 40, 20, 40, 79});
  Autoencoder ae({2, 1, 2}, 1);
  auto theta = ae.parameters();
  std::fill(theta.begin(), theta.end(), 0.0);
  ae.set_parameters(theta);
  // all-zero weights reconstruct the origin exactly
  CHECK(ae.score(std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("autoencoder learns a rank-1 manifold") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::vector<double> dir = {0.5, -0.5, 0.5, 0.5};
  Matrix x(400, 4);
  for (std::size_t i = 0; i < 400; ++i) {
    const double t = u(rng);
    for (int c = 0; c < 4; ++c) x(i, c) = t * dir[c];
  }
  AutoencoderParams p;
  p.layer_sizes = {4, 3, 1, 3, 4};
  p.epochs = 200;
  p.learning_rate = 1e-2;
  std::vector<double> history;
  const auto ae = Autoencoder::fit(x, p, &history);
  REQUIRE(history.size() == 200);
  std::vector<double> in;
  for (std::size_t i = 0; i < x.rows(); ++i) in.push_back(ae.score(x.row(i)));
  const double med = stats::quantile(in, 0.5);
  const std::vector<double> off[] = {{0.5, 0.5, 0, 0}, {0, 0, 0.6, -0.6}, {-0.4, -0.4, 0.4, -0.4}};
  for (const auto& q : off) CHECK(ae.score(q) >= 5 * med);
}

TEST_CASE("full-batch loss is non-increasing at a small learning rate") {
  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix x(100, 4);
  for (std::size_t i = 0; i < 100; ++i) {
    const double t = u(rng);
    for (int c = 0; c < 4; ++c) x(i, c) = t * (c % 2 ? -0.5 : 0.5);
  }
  AutoencoderParams p;
  p.layer_sizes = {4, 3, 1, 3, 4};
  p.epochs = 60;
  p.learning_rate = 1e-3;
  p.batch_size = 0;
  p.optimizer = Optimizer::Sgd;
  std::vector<double> h;
  Autoencoder::fit(x, p, &h);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
}

TEST_CASE("autoencoder divergence and determinism") {
  std::mt19937_64 rng(54);
  const Matrix x = fixtures::gaussian(64, 4, rng, 50.0);
  AutoencoderParams bad;
  bad.learning_rate = 1e6;
  bad.optimizer = Optimizer::Sgd;
  bad.epochs = 50;
  CHECK(error_of([&] { Autoencoder::fit(x, bad); }) == ErrorCode::DivergedLoss);
  AutoencoderParams p;
  p.epochs = 5;
  CHECK(Autoencoder::fit(x, p).to_json().dump() == Autoencoder::fit(x, p).to_json().dump());
}

TEST_CASE("orientation on the planted-outlier suite") {
  std::mt19937_64 rng(61);
  std::size_t n_out = 0;
  const Matrix all = planted(rng, 512, 8, n_out);
  std::vector<std::size_t> inliers(512 - n_out);
  std::iota(inliers.begin(), inliers.end(), 0);
  const Matrix benign = all.select_rows(inliers);
  for (auto kind : kAllDetectorKinds) {
    const auto m = fit_detector(kind, benign, default_params(kind, 8));
    const auto s = m->score_all(all);
    std::vector<double> in(s.begin(), s.end() - static_cast<long>(n_out));
    std::vector<double> out(s.end() - static_cast<long>(n_out), s.end());
    CHECK_MESSAGE(stats::quantile(out, 0.5) > stats::quantile(in, 0.99), to_string(kind));
  }
}

TEST_CASE("parameter validation and kind names") {
  const Matrix x(10, 2, 1.0);
  CHECK(error_of([&] { fit_detector(DetectorKind::LocalOutlierFactor, x, {{"neighbours", 3}}); }) ==
        ErrorCode::InvalidArgument);
  for (auto k : kAllDetectorKinds) CHECK(parse_detector_kind(to_string(k)) == k);
  CHECK(parse_detector_kind("OSVM") == DetectorKind::OneClassSvm);
  CHECK_THROWS_AS(parse_detector_kind("svm2"), Error);
  const auto m = fit_detector(DetectorKind::EllipticEnvelope, x, {});
  CHECK(error_of([&] { m->score_all(Matrix(2, 3)); }) == ErrorCode::ManifestMismatch);
}

}  // TEST_SUITE
