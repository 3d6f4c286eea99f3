#include <algorithm>
#include <cmath>
#include <list>
#include <numeric>
#include <random>
#include <unordered_map>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace {

/// LRU cache of kernel columns under a byte budget.
class KernelCache {
 public:
  KernelCache(const Matrix& x, double gamma, std::size_t budget_bytes)
      : x_(x), gamma_(gamma) {
    const std::size_t column_bytes = std::max<std::size_t>(x.rows() * sizeof(double), 1);
    capacity_ = std::max<std::size_t>(budget_bytes / column_bytes, 2);
  }

  const std::vector<double>& column(std::size_t i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<double> col(x_.rows());
    for (std::size_t j = 0; j < x_.rows(); ++j) col[j] = rbf_kernel(x_.row(i), x_.row(j), gamma_);
    lru_.emplace_front(i, std::move(col));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const Matrix& x_;
  double gamma_;
  std::size_t capacity_;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

}  // namespace

SmoResult solve_one_class_dual(const Matrix& x, double nu, double gamma, double tolerance,
                               std::size_t max_iterations, std::size_t cache_bytes) {
  const std::size_t n = x.rows();
  if (n < 2) fail(ErrorCode::EmptyTraining, "one-class SVM needs at least 2 rows");
  if (!(nu > 0.0 && nu <= 1.0)) fail(ErrorCode::InvalidArgument, "nu must lie in (0, 1]");
  if (!(gamma > 0.0)) fail(ErrorCode::InvalidArgument, "gamma must be positive");
  if (max_iterations == 0) max_iterations = std::max<std::size_t>(1'000'000, 100 * n);

  const double upper = 1.0 / (nu * static_cast<double>(n));
  SmoResult r;
  r.alpha.assign(n, 0.0);
  // Feasible start: fill the first entries to the upper bound.
  double remaining = 1.0;
  for (std::size_t i = 0; i < n && remaining > 0.0; ++i) {
    r.alpha[i] = std::min(upper, remaining);
    remaining -= r.alpha[i];
    if (remaining < 1e-15) remaining = 0.0;
  }

  KernelCache cache(x, gamma, cache_bytes);
  std::vector<double> grad(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (r.alpha[i] == 0.0) continue;
    const auto& col = cache.column(i);
    for (std::size_t k = 0; k < n; ++k) grad[k] += r.alpha[i] * col[k];
  }

  for (;;) {
    // i gains mass (alpha_i < upper, smallest gradient); j loses it
    // (alpha_j > 0, largest gradient).
    std::size_t up = n, down = n;
    double g_up = INFINITY, g_down = -INFINITY;
    for (std::size_t k = 0; k < n; ++k) {
      if (r.alpha[k] < upper && grad[k] < g_up) {
        g_up = grad[k];
        up = k;
      }
      if (r.alpha[k] > 0.0 && grad[k] > g_down) {
        g_down = grad[k];
        down = k;
      }
    }
    r.kkt_violation = (up < n && down < n) ? g_down - g_up : 0.0;
    if (r.kkt_violation < tolerance) break;
    if (r.iterations >= max_iterations) {
      fail(ErrorCode::NonConvergence,
           "SMO did not converge after " + std::to_string(r.iterations) +
               " iterations; KKT violation " + std::to_string(r.kkt_violation));
    }
    ++r.iterations;

    const std::vector<double> col_up = cache.column(up);
    const std::vector<double>& col_down = cache.column(down);
    double eta = col_up[up] + col_down[down] - 2.0 * col_up[down];
    if (eta <= 0.0) eta = 1e-12;
    double step = (g_down - g_up) / eta;
    const double room_up = upper - r.alpha[up];
    const double room_down = r.alpha[down];
    if (step >= room_up) {
      step = room_up;
    }
    if (step >= room_down) {
      step = room_down;
    }
    if (step == room_up) {
      r.alpha[up] = upper;
    } else {
      r.alpha[up] += step;
    }
    if (step == room_down) {
      r.alpha[down] = 0.0;
    } else {
      r.alpha[down] -= step;
    }
    for (std::size_t k = 0; k < n; ++k) grad[k] += step * (col_up[k] - col_down[k]);
  }

  // rho at the low end of the KKT interval: every vector below the box then
  // has g >= 0, so only bounded vectors (at most nu n) fall outside.
  double lowest_free = INFINITY, highest = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    if (r.alpha[k] < upper) lowest_free = std::min(lowest_free, grad[k]);
    highest = std::max(highest, grad[k]);
  }
  r.rho = std::isfinite(lowest_free) ? lowest_free : highest;
  double obj = 0.0;
  for (std::size_t k = 0; k < n; ++k) obj += r.alpha[k] * grad[k];
  r.objective = 0.5 * obj;
  return r;
}

OneClassSvm OneClassSvm::fit(const Matrix& x, const OneClassSvmParams& p) {
  Matrix train = x;
  if (x.rows() > p.max_train) {
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(p.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(p.max_train);
    std::sort(idx.begin(), idx.end());
    train = x.select_rows(idx);
  }
  const double gamma = p.gamma > 0.0 ? p.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(x.cols(), 1));
  OneClassSvm m;
  m.gamma_ = gamma;
  m.training_ = solve_one_class_dual(train, p.nu, gamma, p.tolerance, p.max_iterations, p.cache_bytes);
  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < train.rows(); ++i) {
    if (m.training_.alpha[i] > 0.0) sv.push_back(i);
  }
  m.support_ = train.select_rows(sv);
  for (auto i : sv) m.coef_.push_back(m.training_.alpha[i]);
  m.rho_ = m.training_.rho;
  return m;
}

double OneClassSvm::decision(std::span<const double> x) const {
  if (x.size() != support_.cols()) fail(ErrorCode::ManifestMismatch, "one-class SVM input width mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < coef_.size(); ++i) s += coef_[i] * rbf_kernel(support_.row(i), x, gamma_);
  return s - rho_;
}

double OneClassSvm::score(std::span<const double> x) const { return -decision(x); }

nlohmann::json OneClassSvm::to_json() const {
  return {{"gamma", gamma_},
          {"rho", rho_},
          {"dims", support_.cols()},
          {"coef", coef_},
          {"support", support_.data()}};
}

OneClassSvm OneClassSvm::from_json(const nlohmann::json& j) {
  OneClassSvm m;
  m.gamma_ = j.at("gamma").get<double>();
  m.rho_ = j.at("rho").get<double>();
  m.coef_ = j.at("coef").get<std::vector<double>>();
  const auto dims = j.at("dims").get<std::size_t>();
  auto flat = j.at("support").get<std::vector<double>>();
  if (flat.size() != dims * m.coef_.size()) fail(ErrorCode::ModelFormat, "support matrix malformed");
  m.support_ = Matrix(m.coef_.size(), dims);
  m.support_.data() = std::move(flat);
  return m;
}

}  // namespace botwatch
