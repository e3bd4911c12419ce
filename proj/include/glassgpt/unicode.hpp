#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "glassgpt/detail/unicode_tables.hpp"

namespace glassgpt::unicode {

inline constexpr char32_t replacement_character = 0xFFFD;

/// One step of UTF-8 decoding. When `valid` is false, `length` is the size of
/// the maximal ill-formed subpart starting at the decode position.
struct decoded_codepoint {
    char32_t codepoint;
    std::size_t length;
    bool valid;
};

inline decoded_codepoint decode_one(std::string_view s, std::size_t pos) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char lead = byte(pos);
    if (lead < 0x80) return {lead, 1, true};

    std::size_t need = 0;
    char32_t cp = 0;
    unsigned char lo = 0x80, hi = 0xBF;
    if (lead >= 0xC2 && lead <= 0xDF) {
        need = 1;
        cp = lead & 0x1F;
    } else if (lead >= 0xE0 && lead <= 0xEF) {
        need = 2;
        cp = lead & 0x0F;
        if (lead == 0xE0) lo = 0xA0;
        if (lead == 0xED) hi = 0x9F;
    } else if (lead >= 0xF0 && lead <= 0xF4) {
        need = 3;
        cp = lead & 0x07;
        if (lead == 0xF0) lo = 0x90;
        if (lead == 0xF4) hi = 0x8F;
    } else {
        return {replacement_character, 1, false};
    }

    std::size_t i = 1;
    for (; i <= need; ++i) {
        if (pos + i >= s.size()) return {replacement_character, i, false};
        const unsigned char c = byte(pos + i);
        if (c < lo || c > hi) return {replacement_character, i, false};
        lo = 0x80;
        hi = 0xBF;
        cp = (cp << 6) | (c & 0x3F);
    }
    return {cp, i, true};
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_valid_utf8(std::string_view s) {
    for (std::size_t pos = 0; pos < s.size();) {
        const auto d = decode_one(s, pos);
        if (!d.valid) return false;
        pos += d.length;
    }
    return true;
}

/// Copy of `bytes` with every maximal ill-formed subsequence replaced by U+FFFD.
inline std::string to_valid_utf8(std::string_view bytes) {
    std::string out;
    out.reserve(bytes.size());
    for (std::size_t pos = 0; pos < bytes.size();) {
        const auto d = decode_one(bytes, pos);
        if (d.valid) {
            out.append(bytes.substr(pos, d.length));
        } else {
            append_utf8(out, replacement_character);
        }
        pos += d.length;
    }
    return out;
}

namespace detail {

template <std::size_t N>
bool in_ranges(const std::array<glassgpt::detail::codepoint_range, N>& ranges, char32_t cp) {
    auto it = std::upper_bound(ranges.begin(), ranges.end(), static_cast<std::uint32_t>(cp),
                               [](std::uint32_t v, const auto& r) { return v < r.first; });
    if (it == ranges.begin()) return false;
    --it;
    return cp <= it->last;
}

}  // namespace detail

/// General category L*.
inline bool is_letter(char32_t cp) { return detail::in_ranges(glassgpt::detail::letter_ranges, cp); }
/// General category N*.
inline bool is_number(char32_t cp) { return detail::in_ranges(glassgpt::detail::number_ranges, cp); }
/// Whitespace as matched by `\s`.
inline bool is_space(char32_t cp) { return detail::in_ranges(glassgpt::detail::space_ranges, cp); }

}  // namespace glassgpt::unicode
