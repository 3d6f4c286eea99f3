#include "botwatch/select.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "botwatch/csv.hpp"
#include "botwatch/error.hpp"
#include "botwatch/stats.hpp"

namespace botwatch {

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::Mean: return "mean";
    case Aggregation::Majority: return "majority";
    case Aggregation::Borda: return "borda";
  }
  return "mean";
}

Aggregation parse_aggregation(std::string_view raw) {
  std::string text(raw);
  for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (text == "mean") return Aggregation::Mean;
  if (text == "majority") return Aggregation::Majority;
  if (text == "borda") return Aggregation::Borda;
  fail(ErrorCode::ConfigInvalid, "unknown aggregation '" + std::string(raw) + "'");
}

Matrix rbf_similarity(const Matrix& x, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::NonPositiveSigma, "sigma must be positive");
  const std::size_t n = x.rows();
  const double scale = -1.0 / (2.0 * sigma * sigma);
  Matrix s(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = x.row(j);
      double d2 = 0.0;
      for (std::size_t c = 0; c < xi.size(); ++c) {
        const double d = xi[c] - xj[c];
        d2 += d * d;
      }
      s(i, j) = s(j, i) = std::exp(d2 * scale);
    }
  }
  return s;
}

double spectral_score(std::span<const double> f, const Matrix& s) {
  const std::size_t n = s.rows();
  if (f.size() != n || s.cols() != n) {
    fail(ErrorCode::InvalidArgument, "feature length does not match similarity matrix");
  }
  double f_s_f = 0.0, f_d_f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = s.row(i);
    double degree = 0.0, sf = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      degree += row[j];
      sf += row[j] * f[j];
    }
    if (!(degree > 0.0)) fail(ErrorCode::DegenerateGraph, "zero-degree node in similarity graph");
    f_s_f += f[i] * sf;
    f_d_f += f[i] * f[i] * degree;
  }
  if (f_d_f == 0.0) return 0.0;  // zero vector: no variation to measure
  return std::max(0.0, 1.0 - f_s_f / f_d_f);
}

double pair_entropy(double s) {
  double e = 0.0;
  if (s > 0.0 && s < 1.0) e -= s * std::log2(s) + (1.0 - s) * std::log2(1.0 - s);
  return e;
}

double similarity_entropy(const Matrix& s) {
  double e = 0.0;
  for (double v : s.data()) e += pair_entropy(v);
  return e;
}

double information_score(std::span<const double> f, double sigma) {
  if (!(sigma > 0.0)) fail(ErrorCode::NonPositiveSigma, "sigma must be positive");
  const double scale = -1.0 / (2.0 * sigma * sigma);
  double e = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = i + 1; j < f.size(); ++j) {
      const double d = f[i] - f[j];
      e += pair_entropy(std::exp(d * d * scale));
    }
  }
  // Diagonal terms are S_ii = 1 and contribute nothing; the sum is symmetric.
  return 2.0 * e;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) fail(ErrorCode::InvalidArgument, "pearson: length mismatch");
  const double ma = stats::mean(a), mb = stats::mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorCode::ZeroVariance, "pearson of a constant column");
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> pearson_redundancy(const Matrix& x) {
  const std::size_t m = x.cols(), n = x.rows();
  if (m < 2) fail(ErrorCode::InvalidArgument, "pearson redundancy needs at least 2 features");
  // Center and scale each column once; correlations are then dot products.
  std::vector<std::vector<double>> z(m);
  for (std::size_t c = 0; c < m; ++c) {
    z[c] = x.column(c);
    const double mu = stats::mean(z[c]);
    double ss = 0.0;
    for (double& v : z[c]) {
      v -= mu;
      ss += v * v;
    }
    if (ss == 0.0) fail(ErrorCode::ZeroVariance, "constant column " + std::to_string(c));
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : z[c]) v *= inv;
  }
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < n; ++r) dot += z[i][r] * z[j][r];
      const double a = std::min(1.0, std::abs(dot));
      out[i] += a;
      out[j] += a;
    }
  }
  return out;
}

double intra_class_distance(std::span<const double> f) {
  if (f.empty()) return 0.0;
  const double centroid = stats::mean(f);
  double s = 0.0;
  for (double v : f) s += std::abs(v - centroid);
  return s / static_cast<double>(f.size());
}

double iqr_score(std::span<const double> f) {
  if (f.size() < 4) fail(ErrorCode::TooFewSamples, "IQR needs at least 4 samples");
  std::vector<double> sorted(f.begin(), f.end());
  std::sort(sorted.begin(), sorted.end());
  return stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
}

std::vector<std::size_t> rank_ascending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::size_t> rank(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos + 1;
  return rank;
}

RankedFeatureList aggregate_ranks(const std::vector<std::vector<std::size_t>>& ranks,
                                  const std::vector<std::string>& features, Aggregation method,
                                  std::size_t keep) {
  const std::size_t m = features.size();
  if (ranks.empty()) fail(ErrorCode::RankListMismatch, "no rank lists to aggregate");
  for (const auto& list : ranks) {
    if (list.size() != m) fail(ErrorCode::RankListMismatch, "rank list length differs from manifest");
    std::vector<bool> seen(m + 1, false);
    for (auto r : list) {
      if (r < 1 || r > m || seen[r]) fail(ErrorCode::RankListMismatch, "rank list is not a permutation");
      seen[r] = true;
    }
  }
  if (keep > m) fail(ErrorCode::InvalidArgument, "cannot keep more features than exist");

  RankedFeatureList out;
  out.features = features;
  out.ranks = ranks;
  out.method = method;
  out.aggregate.assign(m, 0.0);
  for (std::size_t f = 0; f < m; ++f) {
    std::vector<double> r;
    for (const auto& list : ranks) r.push_back(static_cast<double>(list[f]));
    switch (method) {
      case Aggregation::Mean:
        out.aggregate[f] = stats::mean(r);
        break;
      case Aggregation::Majority:
        out.aggregate[f] = stats::quantile(r, 0.5);
        break;
      case Aggregation::Borda:
        for (double v : r) out.aggregate[f] += static_cast<double>(m) - v;
        break;
    }
  }
  // Borda ranks by descending points; the others by ascending rank summary.
  std::vector<double> key = out.aggregate;
  if (method == Aggregation::Borda) {
    for (double& v : key) v = -v;
  }
  out.aggregated_rank = rank_ascending(key);
  out.order.resize(m);
  for (std::size_t f = 0; f < m; ++f) out.order[out.aggregated_rank[f] - 1] = f;
  for (std::size_t f = 0; f < m; ++f) {
    if (out.aggregated_rank[f] <= keep) out.selected.push_back(features[f]);
  }
  return out;
}

RankedFeatureList select_features(const FeatureMatrix& normalized, const SelectionConfig& cfg) {
  const Matrix& x = normalized.values;
  const std::size_t m = x.cols();
  if (x.rows() < 4) fail(ErrorCode::TooFewSamples, "feature selection needs at least 4 rows");
  if (m < 2) fail(ErrorCode::InvalidArgument, "feature selection needs at least 2 features");

  std::size_t keep = m;
  if (cfg.keep) {
    keep = *cfg.keep;
  } else if (cfg.keep_fraction) {
    keep = static_cast<std::size_t>(std::lround(*cfg.keep_fraction * static_cast<double>(m)));
  }
  if (keep > m) fail(ErrorCode::InvalidArgument, "keep exceeds manifest length");

  Matrix sample = x;
  if (x.rows() > cfg.max_similarity_rows) {
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cfg.max_similarity_rows);
    std::sort(idx.begin(), idx.end());
    sample = x.select_rows(idx);
  }
  const Matrix s = rbf_similarity(sample, cfg.sigma);

  std::vector<std::vector<double>> scores(5, std::vector<double>(m));
  for (std::size_t c = 0; c < m; ++c) {
    const auto col_sample = sample.column(c);
    const auto col = x.column(c);
    scores[0][c] = spectral_score(col_sample, s);
    scores[1][c] = information_score(col_sample, cfg.sigma);
    scores[3][c] = intra_class_distance(col);
    scores[4][c] = iqr_score(col);
  }
  scores[2] = pearson_redundancy(x);

  std::vector<std::vector<std::size_t>> ranks;
  for (const auto& sc : scores) ranks.push_back(rank_ascending(sc));
  RankedFeatureList out = aggregate_ranks(ranks, normalized.manifest.names(), cfg.aggregation, keep);
  out.criteria = {"spectral", "information", "pearson", "intra_class", "iqr"};
  out.scores = std::move(scores);
  return out;
}

void write_ranking_csv(const std::filesystem::path& path, const RankedFeatureList& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IOError, "cannot create '" + path.string() + "'");
  out << "feature";
  for (const auto& c : r.criteria) out << ',' << c << "_score";
  for (const auto& c : r.criteria) out << ',' << c << "_rank";
  out << ",aggregate_" << to_string(r.method) << ",aggregated_rank,selected\n";
  for (std::size_t pos = 0; pos < r.order.size(); ++pos) {
    const std::size_t f = r.order[pos];
    out << r.features[f];
    for (const auto& s : r.scores) out << ',' << csv::format_double(s[f]);
    for (const auto& k : r.ranks) out << ',' << k[f];
    const bool selected =
        std::find(r.selected.begin(), r.selected.end(), r.features[f]) != r.selected.end();
    out << ',' << csv::format_double(r.aggregate[f]) << ',' << r.aggregated_rank[f] << ','
        << (selected ? 1 : 0) << '\n';
  }
}

}  // namespace botwatch
