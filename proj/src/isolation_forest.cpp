#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "botwatch/detectors.hpp"
#include "botwatch/error.hpp"

namespace botwatch {

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  double harmonic = 0.0;  // H(n-1)
  for (std::size_t i = 1; i < n; ++i) harmonic += 1.0 / static_cast<double>(i);
  const double nn = static_cast<double>(n);
  return 2.0 * harmonic - 2.0 * (nn - 1.0) / nn;
}

double isolation_score(double mean_path, std::size_t n) {
  const double c = average_path_length(n);
  if (c == 0.0) return 0.5;
  return std::exp2(-mean_path / c);
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::mt19937_64& rng, std::size_t max_depth)
      : x_(x), rng_(rng), max_depth_(max_depth) {}

  IsolationForest::Tree build(std::vector<std::size_t> idx) {
    tree_.clear();
    grow(idx, 0, idx.size(), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                    std::size_t depth) {
    const auto at = static_cast<std::int32_t>(tree_.size());
    tree_.push_back({});
    tree_[static_cast<std::size_t>(at)].size = static_cast<std::uint32_t>(hi - lo);
    if (hi - lo <= 1 || depth >= max_depth_) return at;

    std::vector<std::size_t> candidates;
    std::vector<std::pair<double, double>> ranges(x_.cols());
    for (std::size_t c = 0; c < x_.cols(); ++c) {
      double mn = x_(idx[lo], c), mx = mn;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        mn = std::min(mn, x_(idx[i], c));
        mx = std::max(mx, x_(idx[i], c));
      }
      ranges[c] = {mn, mx};
      if (mx > mn) candidates.push_back(c);
    }
    if (candidates.empty()) return at;

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t feature = candidates[pick(rng_)];
    const auto [mn, mx] = ranges[feature];
    std::uniform_real_distribution<double> between(mn, mx);
    const double split = between(rng_);
    auto mid_it = std::partition(idx.begin() + static_cast<long>(lo), idx.begin() + static_cast<long>(hi),
                                 [&](std::size_t r) { return x_(r, feature) < split; });
    const auto mid = static_cast<std::size_t>(mid_it - idx.begin());

    const std::int32_t left = grow(idx, lo, mid, depth + 1);
    const std::int32_t right = grow(idx, mid, hi, depth + 1);
    auto& node = tree_[static_cast<std::size_t>(at)];
    node.feature = static_cast<std::int32_t>(feature);
    node.split = split;
    node.left = left;
    node.right = right;
    return at;
  }

  const Matrix& x_;
  std::mt19937_64& rng_;
  std::size_t max_depth_;
  IsolationForest::Tree tree_;
};

}  // namespace

IsolationForest IsolationForest::fit(const Matrix& x, const IsolationForestParams& p) {
  if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "isolation forest needs training rows");
  if (p.n_trees == 0) fail(ErrorCode::InvalidArgument, "n_trees must be positive");
  IsolationForest f;
  f.dims_ = x.cols();
  f.sample_size_ = std::min(std::max<std::size_t>(p.subsample, 2), x.rows());
  const auto max_depth = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(std::max<std::size_t>(f.sample_size_, 2)))));

  std::mt19937_64 rng(p.seed);
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  TreeBuilder builder(x, rng, max_depth);
  f.trees_.reserve(p.n_trees);
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    // Partial Fisher-Yates: first sample_size_ entries are a uniform sample.
    for (std::size_t i = 0; i < f.sample_size_; ++i) {
      std::uniform_int_distribution<std::size_t> d(i, all.size() - 1);
      std::swap(all[i], all[d(rng)]);
    }
    std::vector<std::size_t> sample(all.begin(), all.begin() + static_cast<long>(f.sample_size_));
    f.trees_.push_back(builder.build(std::move(sample)));
  }
  return f;
}

double IsolationForest::mean_path_length(std::span<const double> x) const {
  double total = 0.0;
  for (const Tree& tree : trees_) {
    std::size_t node = 0;
    double depth = 0.0;
    while (tree[node].feature >= 0) {
      const auto& n = tree[node];
      node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.split ? n.left : n.right);
      depth += 1.0;
    }
    total += depth + average_path_length(tree[node].size);
  }
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> x) const {
  if (x.size() != dims_) fail(ErrorCode::ManifestMismatch, "isolation forest input width mismatch");
  return isolation_score(mean_path_length(x), sample_size_);
}

nlohmann::json IsolationForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : trees_) {
    nlohmann::json feature = nlohmann::json::array(), split = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   size = nlohmann::json::array();
    for (const Node& n : tree) {
      feature.push_back(n.feature);
      split.push_back(n.split);
      left.push_back(n.left);
      right.push_back(n.right);
      size.push_back(n.size);
    }
    trees.push_back({{"feature", feature}, {"split", split}, {"left", left},
                     {"right", right}, {"size", size}});
  }
  return {{"dims", dims_}, {"sample_size", sample_size_}, {"trees", trees}};
}

IsolationForest IsolationForest::from_json(const nlohmann::json& j) {
  IsolationForest f;
  f.dims_ = j.at("dims").get<std::size_t>();
  f.sample_size_ = j.at("sample_size").get<std::size_t>();
  for (const auto& t : j.at("trees")) {
    const auto& feature = t.at("feature");
    Tree tree(feature.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      tree[i].feature = feature[i].get<std::int32_t>();
      tree[i].split = t.at("split")[i].get<double>();
      tree[i].left = t.at("left")[i].get<std::int32_t>();
      tree[i].right = t.at("right")[i].get<std::int32_t>();
      tree[i].size = t.at("size")[i].get<std::uint32_t>();
    }
    f.trees_.push_back(std::move(tree));
  }
  if (f.trees_.empty()) fail(ErrorCode::ModelFormat, "isolation forest without trees");
  return f;
}

}  // namespace botwatch
