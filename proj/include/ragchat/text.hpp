#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace ragchat::text {

std::string_view trim(std::string_view s);
bool is_blank(std::string_view s);

/// Number of UTF-8 code points; invalid bytes count as one each.
std::size_t codepoint_count(std::string_view s);

bool is_valid_utf8(std::string_view s);

/// Largest n <= limit such that s[0, n) does not end inside a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t limit);

std::string ascii_lower(std::string_view s);

/// FNV-1a over bytes, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

std::string hex64(std::uint64_t v);

}  // namespace ragchat::text
