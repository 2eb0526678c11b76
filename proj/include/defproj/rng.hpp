#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace defproj {

// splitmix64 step; also the workhorse generator below. The standard library
// distributions are not pinned across implementations, so sampling is done
// by hand to keep runs reproducible.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Expands one master seed into independent streams keyed by a label and a
// counter. All component seeds in a run flow through here.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::uint64_t counter = 0) {
  std::uint64_t state = master;
  state ^= fnv1a64(label);
  state ^= 0x632be59bd9b4e019ULL * (counter + 1);
  splitmix64(state);
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // burn a couple of outputs so that low-entropy seeds decorrelate
    next();
    next();
  }

  std::uint64_t next() { return splitmix64(state_); }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0,n)
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t mask = ~0ULL >> std::countl_zero(n | 1ULL);
    for (;;) {
      const std::uint64_t v = next() & mask;
      if (v < n) return v;
    }
  }

  // standard normal, Box-Muller with one cached value
  double gaussian() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0,1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace defproj
