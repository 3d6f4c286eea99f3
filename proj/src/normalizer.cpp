#include "botwatch/normalizer.hpp"

#include <cmath>

#include "botwatch/error.hpp"

namespace botwatch {

NormalizationStats fit_normalizer(const FeatureMatrix& x) {
  const std::size_t n = x.values.rows();
  if (n == 0) fail(ErrorCode::EmptyTrainingSet, "cannot fit normalizer on zero rows");
  NormalizationStats s;
  s.input = x.manifest;
  std::vector<FeatureSpec> kept;
  for (std::size_t c = 0; c < x.values.cols(); ++c) {
    double lo = x.values(0, c), hi = lo, sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = x.values(r, c);
      if (!std::isfinite(v)) {
        fail(ErrorCode::InvalidArgument, "non-finite value in column '" + x.manifest[c].name + "'");
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    if (lo == hi) {
      s.dropped.push_back(x.manifest[c].name);
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = x.values(r, c) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) {
      s.dropped.push_back(x.manifest[c].name);
      continue;
    }
    s.retained_index.push_back(c);
    s.mean.push_back(mean);
    s.stddev.push_back(sd);
    kept.push_back(x.manifest[c]);
  }
  s.retained = FeatureManifest(x.manifest.mode(), std::move(kept));
  return s;
}

void NormalizationStats::apply_row(std::span<const double> raw, std::span<double> out) const {
  if (raw.size() != input.size() || out.size() != retained_index.size()) {
    fail(ErrorCode::ManifestMismatch, "row width does not match normalizer manifest");
  }
  for (std::size_t j = 0; j < retained_index.size(); ++j) {
    out[j] = (raw[retained_index[j]] - mean[j]) / stddev[j];
  }
}

std::vector<double> NormalizationStats::apply_row(std::span<const double> raw) const {
  std::vector<double> out(retained_index.size());
  apply_row(raw, out);
  return out;
}

FeatureMatrix apply_normalizer(const FeatureMatrix& x, const NormalizationStats& stats) {
  if (x.manifest.names() != stats.input.names()) {
    fail(ErrorCode::ManifestMismatch, "matrix manifest " + x.manifest.hash() +
                                          " does not match normalizer manifest " +
                                          stats.input.hash());
  }
  FeatureMatrix out{stats.retained, Matrix(x.values.rows(), stats.retained_index.size()), x.labels};
  for (std::size_t r = 0; r < x.values.rows(); ++r) {
    stats.apply_row(x.values.row(r), out.values.row(r));
  }
  return out;
}

}  // namespace botwatch
