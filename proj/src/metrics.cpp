#include <algorithm>
#include <cmath>
#include <numeric>

#include "botwatch/error.hpp"
#include "botwatch/metrics.hpp"

namespace botwatch {

void Confusion::add(bool predicted, bool actual) noexcept {
  if (actual) {
    ++(predicted ? tp : fn);
  } else {
    ++(predicted ? fp : tn);
  }
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

BinaryMetrics binary_metrics(const Confusion& c) {
  BinaryMetrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.fpr = ratio(c.fp, c.fp + c.tn);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

namespace {

struct RocCounts {
  std::vector<double> threshold;
  std::vector<std::uint64_t> fp, tp;  // cumulative, starting with 0
  std::uint64_t pos = 0, neg = 0;
};

RocCounts roc_counts(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) fail(ErrorCode::InvalidArgument, "scores and labels differ in length");
  RocCounts c;
  for (bool b : positive) c.pos += b;
  c.neg = positive.size() - c.pos;
  if (c.pos == 0 || c.neg == 0) fail(ErrorCode::SingleClass, "ROC needs both classes");
  for (double s : scores) {
    if (std::isnan(s)) fail(ErrorCode::InvalidArgument, "NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

  c.threshold.push_back(INFINITY);
  c.fp.push_back(0);
  c.tp.push_back(0);
  std::uint64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    c.threshold.push_back(s);
    c.fp.push_back(fp);
    c.tp.push_back(tp);
  }
  return c;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const double> scores, const std::vector<bool>& positive) {
  const auto c = roc_counts(scores, positive);
  std::vector<RocPoint> pts;
  for (std::size_t i = 0; i < c.threshold.size(); ++i) {
    pts.push_back({c.threshold[i], static_cast<double>(c.fp[i]) / static_cast<double>(c.neg),
                   static_cast<double>(c.tp[i]) / static_cast<double>(c.pos)});
  }
  return pts;
}

double auc(std::span<const double> scores, const std::vector<bool>& positive) {
  const auto c = roc_counts(scores, positive);
  // Trapezoids in count space: twice the area is an integer.
  unsigned __int128 twice = 0;
  for (std::size_t i = 1; i < c.threshold.size(); ++i) {
    twice += static_cast<unsigned __int128>(c.fp[i] - c.fp[i - 1]) * (c.tp[i] + c.tp[i - 1]);
  }
  return static_cast<double>(static_cast<long double>(twice) /
                             (2.0L * static_cast<long double>(c.pos) * static_cast<long double>(c.neg)));
}

}  // namespace botwatch
