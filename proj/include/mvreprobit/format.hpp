#ifndef MVREPROBIT_FORMAT_HPP
#define MVREPROBIT_FORMAT_HPP

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>

namespace mvreprobit {

// Shortest text that parses back to exactly the same double.
inline std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

// FNV-1a, stable across platforms; used for spec hashes in chain headers.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

}  // namespace mvreprobit

#endif  // MVREPROBIT_FORMAT_HPP
