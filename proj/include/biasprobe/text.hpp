#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace biasprobe::text {

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Lowercased alphanumeric word tokens; everything else separates.
std::vector<std::string> word_tokens(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// printf-style "%.*g" without locale surprises.
std::string format_double(double v, int precision = 10);
std::string format_fixed(double v, int decimals);

}  // namespace biasprobe::text
