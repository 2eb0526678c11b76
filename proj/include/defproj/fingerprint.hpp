#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "defproj/rng.hpp"

namespace defproj {

// Incremental FNV-1a over heterogeneous content. Used to fingerprint
// parameter sets and entry-embedding matrices so provenance can be checked
// cheaply (bitwise-sensitive, not cryptographic).
class Fingerprint {
 public:
  void mix(std::string_view s) {
    h_ = fnv1a64(s, h_);
    mix_byte(0xff);  // field separator
  }

  void mix_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) mix_byte(b[i]);
  }

  void mix_u64(std::uint64_t v) { mix_bytes(&v, sizeof v); }
  void mix_i64(std::int64_t v) { mix_bytes(&v, sizeof v); }

  template <typename S>
  void mix_values(const S* p, std::size_t n) {
    mix_bytes(p, n * sizeof(S));
  }

  std::uint64_t value() const { return h_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = h_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  void mix_byte(unsigned char c) {
    h_ ^= c;
    h_ *= 0x100000001b3ULL;
  }

  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace defproj
