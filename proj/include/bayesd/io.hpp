#pragma once

#include <charconv>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bayesd::io {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

// Fixed-precision rendering for human-readable tables.
std::string format_fixed(double v, int digits);

std::optional<double> parse_double(std::string_view text);

std::vector<std::string> split(std::string_view line, char delimiter);

std::string_view trim(std::string_view s);

// Reads one line, stripping a trailing '\r'. Returns false at end of input.
bool read_line(std::istream& in, std::string& line);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Hex-encoded FNV-1a 64-bit digest, used for manifest input hashes.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace bayesd::io
