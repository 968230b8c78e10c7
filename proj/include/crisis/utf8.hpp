#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace crisis::utf8 {

bool is_valid(std::string_view text);

/// Number of code points; invalid bytes count as one each.
std::size_t length(std::string_view text);

/// Decodes, replacing each invalid sequence with U+FFFD.
std::u32string decode(std::string_view text);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

/// Simple per-code-point lowercase (root locale).
std::string to_lower(std::string_view text);

/// Splits on Unicode whitespace, dropping empty pieces.
std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace crisis::utf8
