#pragma once

// Small text helpers shared by the CSV, model and scenario readers.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace greenhouse {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::optional<int> parse_int(std::string_view s);
std::optional<long long> parse_int64(std::string_view s);
std::optional<double> parse_double(std::string_view s);

/// Shortest decimal that reads back to the same double.
std::string format_shortest(double v);
/// Fixed 17 significant digits (model files).
std::string format_g17(double v);

}  // namespace greenhouse
