#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fidelity {

/// Gender labels shared by the English and Hindi sides. `none` is used by
/// signals that carry no gender (ergative, honorific).
enum class Gender : std::uint8_t { none, male, female, neutral, ambiguous };

std::string_view to_string(Gender g);
std::optional<Gender> parse_gender(std::string_view s);
/// male <-> female; every other value maps to itself.
Gender opposite(Gender g);
inline bool is_binary(Gender g) { return g == Gender::male || g == Gender::female; }

namespace text {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

bool is_devanagari(char32_t cp);
bool is_space(char32_t cp);
bool is_punct(char32_t cp);
bool is_digit(char32_t cp);

/// Number of code points excluding whitespace.
std::size_t count_nonspace(std::string_view s);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// 64-bit FNV-1a; used for stable ids and digests, not for security.
std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
/// Shorthand for hex64(fnv1a64(s)).
std::string digest(std::string_view s);

/// splitmix64 step; turns (seed, stream) pairs into independent engine seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace text
}  // namespace fidelity
