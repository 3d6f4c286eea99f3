#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "botwatch/matrix.hpp"

namespace oracle {

inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Textbook LOF: N_k includes every point within the k-distance.
struct BruteLof {
  const botwatch::Matrix& x;
  std::size_t k;
  double floor;

  double k_distance_of_train(std::size_t i) const {
    std::vector<double> d;
    for (std::size_t j = 0; j < x.rows(); ++j)
      if (j != i) d.push_back(dist(x.row(i), x.row(j)));
    std::sort(d.begin(), d.end());
    return d[k - 1];
  }
  std::vector<std::size_t> neighbors_of_train(std::size_t i) const {
    const double kd = k_distance_of_train(i);
    std::vector<std::size_t> n;
    for (std::size_t j = 0; j < x.rows(); ++j)
      if (j != i && dist(x.row(i), x.row(j)) <= kd) n.push_back(j);
    return n;
  }
  double reach(std::span<const double> p, std::size_t o) const {
    return std::max({k_distance_of_train(o), dist(p, x.row(o)), floor});
  }
  double lrd_train(std::size_t i) const {
    const auto n = neighbors_of_train(i);
    double s = 0;
    for (auto o : n) s += reach(x.row(i), o);
    return static_cast<double>(n.size()) / s;
  }
  double score(std::span<const double> q) const {
    std::vector<double> d;
    for (std::size_t j = 0; j < x.rows(); ++j) d.push_back(dist(q, x.row(j)));
    auto sorted = d;
    std::sort(sorted.begin(), sorted.end());
    const double kd = sorted[k - 1];
    std::vector<std::size_t> n;
    for (std::size_t j = 0; j < x.rows(); ++j)
      if (d[j] <= kd) n.push_back(j);
    double s = 0, lrd_sum = 0;
    for (auto o : n) {
      s += reach(q, o);
      lrd_sum += lrd_train(o);
    }
    const double lrd_q = static_cast<double>(n.size()) / s;
    return lrd_sum / static_cast<double>(n.size()) / lrd_q;
  }
};

/// Euclidean projection onto {a : sum a = 1, 0 <= a <= c}, by bisection on
/// the shift tau in a_i = clamp(v_i - tau, 0, c).
inline std::vector<double> project_capped_simplex(const std::vector<double>& v, double c) {
  double lo = *std::min_element(v.begin(), v.end()) - c - 1.0;
  double hi = *std::max_element(v.begin(), v.end()) + 1.0;
  auto mass = [&](double tau) {
    double s = 0;
    for (double x : v) s += std::clamp(x - tau, 0.0, c);
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  std::vector<double> a(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) a[i] = std::clamp(v[i] - 0.5 * (lo + hi), 0.0, c);
  return a;
}

/// min 0.5 a^T K a over the capped simplex by accelerated projected gradient.
inline double qp_min(const std::vector<std::vector<double>>& K, double c, int iterations = 20000) {
  const std::size_t n = K.size();
  double L = 0;
  for (const auto& row : K) {
    double s = 0;
    for (double v : row) s += std::abs(v);
    L = std::max(L, s);
  }
  auto grad = [&](const std::vector<double>& a) {
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i] += K[i][j] * a[j];
    return g;
  };
  auto objective = [&](const std::vector<double>& a) {
    const auto g = grad(a);
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * g[i];
    return 0.5 * s;
  };
  std::vector<double> a = project_capped_simplex(std::vector<double>(n, 1.0 / static_cast<double>(n)), c);
  std::vector<double> y = a;
  double t = 1;
  for (int it = 0; it < iterations; ++it) {
    const auto g = grad(y);
    std::vector<double> step(n);
    for (std::size_t i = 0; i < n; ++i) step[i] = y[i] - g[i] / L;
    const auto next = project_capped_simplex(step, c);
    const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    for (std::size_t i = 0; i < n; ++i) y[i] = next[i] + (t - 1) / tn * (next[i] - a[i]);
    a = next;
    t = tn;
  }
  return objective(a);
}

/// Mann-Whitney pair count with ties as 1/2.
inline double pair_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!pos[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (pos[j]) continue;
      den += 1;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / den;
}

}  // namespace oracle
