#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// k-th smallest of `dist` (1-based k); reorders a scratch copy.
double kth_smallest(std::vector<double>& scratch, std::size_t k) {
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<long>(k - 1), scratch.end());
  return scratch[k - 1];
}

}  // namespace

LocalOutlierFactor LocalOutlierFactor::fit(const Matrix& x, const LofParams& p) {
  if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "LOF needs training rows");
  if (p.k == 0) fail(ErrorCode::InvalidArgument, "LOF k must be positive");
  LocalOutlierFactor m;
  if (x.rows() > p.max_train) {
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(p.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(p.max_train);
    std::sort(idx.begin(), idx.end());
    m.train_ = x.select_rows(idx);
  } else {
    m.train_ = x;
  }
  const std::size_t n = m.train_.rows();
  if (p.k >= n) {
    fail(ErrorCode::KTooLarge, "LOF k=" + std::to_string(p.k) + " must be below n=" + std::to_string(n));
  }
  m.k_ = p.k;

  // Two passes over row distances: k-distances first, then lrd, which needs
  // the k-distance of every neighbor. Rows are recomputed to keep memory O(n).
  std::vector<double> row(n);
  std::vector<double> scratch;
  auto fill_row = [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) row[j] = euclidean(m.train_.row(i), m.train_.row(j));
  };
  m.k_distance_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    fill_row(i);
    scratch.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) scratch.push_back(row[j]);
    }
    m.k_distance_[i] = kth_smallest(scratch, m.k_);
  }
  m.lrd_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    fill_row(i);
    double reach_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || row[j] > m.k_distance_[i]) continue;
      reach_sum += std::max({m.k_distance_[j], row[j], kMinReachDistance});
      ++count;
    }
    m.lrd_[i] = static_cast<double>(count) / reach_sum;
  }
  return m;
}

double LocalOutlierFactor::score(std::span<const double> x) const {
  if (x.size() != train_.cols()) fail(ErrorCode::ManifestMismatch, "LOF input width mismatch");
  const std::size_t n = train_.rows();
  std::vector<double> dist(n);
  for (std::size_t j = 0; j < n; ++j) dist[j] = euclidean(x, train_.row(j));
  std::vector<double> scratch = dist;
  const double kdist = kth_smallest(scratch, k_);

  double reach_sum = 0.0, lrd_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (dist[j] > kdist) continue;
    reach_sum += std::max({k_distance_[j], dist[j], kMinReachDistance});
    lrd_sum += lrd_[j];
    ++count;
  }
  const double lrd_x = static_cast<double>(count) / reach_sum;
  return lrd_sum / static_cast<double>(count) / lrd_x;
}

nlohmann::json LocalOutlierFactor::to_json() const {
  return {{"k", k_},
          {"dims", train_.cols()},
          {"train", train_.data()},
          {"k_distance", k_distance_},
          {"lrd", lrd_}};
}

LocalOutlierFactor LocalOutlierFactor::from_json(const nlohmann::json& j) {
  LocalOutlierFactor m;
  m.k_ = j.at("k").get<std::size_t>();
  const auto dims = j.at("dims").get<std::size_t>();
  auto flat = j.at("train").get<std::vector<double>>();
  if (dims == 0 || flat.size() % dims != 0) fail(ErrorCode::ModelFormat, "LOF training matrix malformed");
  m.train_ = Matrix(flat.size() / dims, dims);
  m.train_.data() = std::move(flat);
  m.k_distance_ = j.at("k_distance").get<std::vector<double>>();
  m.lrd_ = j.at("lrd").get<std::vector<double>>();
  if (m.k_distance_.size() != m.train_.rows() || m.lrd_.size() != m.train_.rows()) {
    fail(ErrorCode::ModelFormat, "LOF neighborhood tables malformed");
  }
  return m;
}

}  // namespace botwatch
