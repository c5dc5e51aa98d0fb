#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace portalchoice::csv {

// Splits one comma-delimited line. No quoting: identifiers must not contain
// commas or newlines. A trailing '\r' on the line is stripped first.
std::vector<std::string> split(std::string_view line);

std::string join(const std::vector<std::string>& fields);

// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

std::string format_optional(const std::optional<double>& v);

// Full-string integer / double parses. Return nullopt on any trailing junk.
std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<double> parse_double(std::string_view s);

}  // namespace portalchoice::csv
