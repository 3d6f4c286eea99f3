#pragma once

#include <span>
#include <vector>

namespace botwatch::stats {

/// Linear-interpolation quantile of already sorted data (position p*(n-1)).
double quantile_sorted(std::span<const double> sorted, double p);
/// Sorts a copy, then quantile_sorted.
double quantile(std::vector<double> values, double p);

double mean(std::span<const double> v);
/// Population variance.
double variance(std::span<const double> v);

}  // namespace botwatch::stats
