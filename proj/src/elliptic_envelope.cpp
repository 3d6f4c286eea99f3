#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

namespace {

Matrix to_matrix(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  }
  return out;
}

Matrix invert_spd(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    fail(ErrorCode::SingularCovariance, "covariance matrix is not positive definite");
  }
  const Eigen::MatrixXd inv =
      llt.solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  if (!inv.allFinite()) fail(ErrorCode::SingularCovariance, "covariance inverse is not finite");
  return to_matrix(inv);
}

}  // namespace

EllipticEnvelope EllipticEnvelope::fit(const Matrix& x, const EllipticEnvelopeParams& p) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) fail(ErrorCode::EmptyTraining, "elliptic envelope needs training rows");
  if (p.ridge < 0.0) fail(ErrorCode::InvalidArgument, "ridge must be non-negative");
  if (p.ridge == 0.0 && n <= d) {
    fail(ErrorCode::SingularCovariance, "n <= d with zero ridge gives a singular covariance");
  }
  std::vector<double> mean(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  Eigen::VectorXd diff(static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) diff(static_cast<Eigen::Index>(c)) = x(r, c) - mean[c];
    cov.selfadjointView<Eigen::Lower>().rankUpdate(diff);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= static_cast<double>(n);
  cov.diagonal().array() += p.ridge;

  EllipticEnvelope e;
  e.mean_ = std::move(mean);
  e.precision_ = invert_spd(cov);
  return e;
}

EllipticEnvelope EllipticEnvelope::from_moments(std::vector<double> mean, const Matrix& covariance) {
  const auto d = static_cast<Eigen::Index>(mean.size());
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    fail(ErrorCode::InvalidArgument, "covariance shape does not match mean");
  }
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) cov(r, c) = covariance(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  }
  EllipticEnvelope e;
  e.mean_ = std::move(mean);
  e.precision_ = invert_spd(cov);
  return e;
}

double EllipticEnvelope::score(std::span<const double> x) const {
  const std::size_t d = mean_.size();
  if (x.size() != d) fail(ErrorCode::ManifestMismatch, "elliptic envelope input width mismatch");
  double q = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    const double dr = x[r] - mean_[r];
    if (dr == 0.0) continue;
    double row = 0.0;
    const auto prow = precision_.row(r);
    for (std::size_t c = 0; c < d; ++c) row += prow[c] * (x[c] - mean_[c]);
    q += dr * row;
  }
  return std::sqrt(std::max(0.0, q));
}

nlohmann::json EllipticEnvelope::to_json() const {
  return {{"mean", mean_}, {"precision", precision_.data()}};
}

EllipticEnvelope EllipticEnvelope::from_json(const nlohmann::json& j) {
  EllipticEnvelope e;
  e.mean_ = j.at("mean").get<std::vector<double>>();
  const std::size_t d = e.mean_.size();
  auto flat = j.at("precision").get<std::vector<double>>();
  if (flat.size() != d * d) fail(ErrorCode::ModelFormat, "precision matrix has wrong size");
  e.precision_ = Matrix(d, d);
  e.precision_.data() = std::move(flat);
  return e;
}

}  // namespace botwatch
