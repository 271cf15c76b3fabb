#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "qkd/bits.hpp"

namespace qkd {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic random stream. All derived quantities (bits, uniforms, bounded
// integers) are computed here from raw 64-bit words so that transcripts are
// identical across standard libraries.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  // Counter-based split: stream for trial `index` of the command `tag`.
  static RandomStream derive(std::uint64_t master, std::string_view tag, std::uint64_t index) {
    std::uint64_t s = detail::splitmix64(master);
    s = detail::splitmix64(s ^ detail::fnv1a(tag));
    s = detail::splitmix64(s ^ index);
    return RandomStream(s);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t next() { return engine_(); }
  bool bit() { return (engine_() >> 63) != 0; }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform on {0, ..., bound-1} by rejection.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("RandomStream::below: bound must be positive");
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  BitString bits(std::size_t n) {
    BitString out(n);
    for (std::size_t i = 0; i < n; ++i) out.set(i, bit());
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

// Uniform k-subset of {0, ..., m-1}, sorted increasingly (partial Fisher-Yates).
inline std::vector<std::size_t> sample_subset(std::size_t m, std::size_t k, RandomStream& rng) {
  if (k > m) throw std::invalid_argument("sample_subset: k exceeds m");
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace qkd
