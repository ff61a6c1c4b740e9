#include "ragchat/text.hpp"

#include <cstdio>

namespace ragchat::text {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// Length of the sequence introduced by lead byte c, 0 if c cannot lead.
std::size_t sequence_length(unsigned char c) {
    if (c < 0x80) return 1;
    if ((c & 0xE0) == 0xC0) return 2;
    if ((c & 0xF0) == 0xE0) return 3;
    if ((c & 0xF8) == 0xF0) return 4;
    return 0;
}

}  // namespace

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::size_t codepoint_count(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) {
        if (!is_continuation(static_cast<unsigned char>(c))) ++n;
    }
    return n;
}

bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto lead = static_cast<unsigned char>(s[i]);
        const std::size_t len = sequence_length(lead);
        if (len == 0 || i + len > s.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            if (!is_continuation(static_cast<unsigned char>(s[i + k]))) return false;
        }
        // overlong forms and surrogates
        if (len == 2 && lead < 0xC2) return false;
        if (len == 3) {
            const auto b1 = static_cast<unsigned char>(s[i + 1]);
            if (lead == 0xE0 && b1 < 0xA0) return false;
            if (lead == 0xED && b1 >= 0xA0) return false;
        }
        if (len == 4) {
            const auto b1 = static_cast<unsigned char>(s[i + 1]);
            if (lead == 0xF0 && b1 < 0x90) return false;
            if (lead > 0xF4 || (lead == 0xF4 && b1 >= 0x90)) return false;
        }
        i += len;
    }
    return true;
}

std::size_t utf8_floor(std::string_view s, std::size_t limit) {
    if (limit >= s.size()) return s.size();
    std::size_t n = limit;
    while (n > 0 && is_continuation(static_cast<unsigned char>(s[n]))) --n;
    return n;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace ragchat::text
