#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace botwatch::csv {

/// Splits one CSV line on commas. Fields are trimmed; quoting is not
/// supported since no field in our formats contains a comma.
std::vector<std::string> split(std::string_view line);

/// Strict numeric parse; throws Error(InvalidArgument) with `context`.
double to_double(const std::string& field, std::string_view context);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace botwatch::csv
