#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <ctime>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nilm::detail {

// Locale-independent fixed-point rendering.
inline std::string format_fixed(double value, int precision) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::fixed, precision);
  if (ec != std::errc{}) return "nan";
  std::string out(buf.data(), end);
  // -0.000 -> 0.000
  if (out.size() > 1 && out[0] == '-' &&
      out.find_first_not_of("-0.") == std::string::npos) {
    out.erase(0, 1);
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    const std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) tokens.push_back(s.substr(start, i - start));
  }
  return tokens;
}

inline bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

template <typename T>
bool parse_number(std::string_view token, T& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

// Bracketed, comma-separated list with fixed decimals: [1.000, 2.500]
inline std::string format_list(std::span<const double> values, int precision) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_fixed(values[i], precision);
  }
  out += ']';
  return out;
}

// Compact binary list: [1,0,1]
inline std::string format_states(std::span<const std::uint8_t> states) {
  std::string out = "[";
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) out += ',';
    out += states[i] ? '1' : '0';
  }
  out += ']';
  return out;
}

// HH:mm:ss of a Unix timestamp in UTC.
inline std::string clock_string(std::int64_t epoch_seconds) {
  std::int64_t day_seconds = epoch_seconds % 86400;
  if (day_seconds < 0) day_seconds += 86400;
  const int h = static_cast<int>(day_seconds / 3600);
  const int m = static_cast<int>((day_seconds / 60) % 60);
  const int s = static_cast<int>(day_seconds % 60);
  std::array<char, 9> buf{};
  buf[0] = static_cast<char>('0' + h / 10);
  buf[1] = static_cast<char>('0' + h % 10);
  buf[2] = ':';
  buf[3] = static_cast<char>('0' + m / 10);
  buf[4] = static_cast<char>('0' + m % 10);
  buf[5] = ':';
  buf[6] = static_cast<char>('0' + s / 10);
  buf[7] = static_cast<char>('0' + s % 10);
  return std::string(buf.data(), 8);
}

// 64-bit FNV-1a; stable across platforms, used for prompt fingerprints.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Rough token estimate (about four characters per token).
inline std::size_t approx_tokens(std::string_view text) {
  return (text.size() + 3) / 4;
}

}  // namespace nilm::detail
