#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "qkd/bits.hpp"
#include "qkd/random.hpp"

namespace qkd {

// Seed of the l x n Toeplitz matrix T_ij = bits[l - 1 - i + j]: the first row
// is bits[l-1 .. n+l-2] and the first column runs bits[l-1] down to bits[0].
struct ToeplitzSeed {
  std::size_t n = 0;
  std::size_t ell = 0;
  BitString bits;

  ToeplitzSeed() = default;
  ToeplitzSeed(std::size_t n_in, std::size_t ell_in, BitString bits_in)
      : n(n_in), ell(ell_in), bits(std::move(bits_in)) {
    validate();
  }

  void validate() const {
    if (!(ell >= 1 && ell <= n)) throw std::invalid_argument("ToeplitzSeed: need 1 <= ell <= n");
    if (bits.size() != n + ell - 1) throw std::invalid_argument("ToeplitzSeed: seed must have n + ell - 1 bits");
  }

  friend bool operator==(const ToeplitzSeed&, const ToeplitzSeed&) = default;
};

inline ToeplitzSeed sample_seed(std::size_t n, std::size_t ell, RandomStream& rng) {
  if (!(ell >= 1 && ell <= n)) throw std::invalid_argument("sample_seed: need 1 <= ell <= n");
  return ToeplitzSeed(n, ell, rng.bits(n + ell - 1));
}

inline BitString hash(const ToeplitzSeed& seed, const BitString& x) {
  if (x.size() != seed.n) throw std::invalid_argument("hash: input length does not match seed");
  BitString out(seed.ell);
  for (std::size_t i = 0; i < seed.ell; ++i) {
    bool acc = false;
    const std::size_t offset = seed.ell - 1 - i;
    for (std::size_t j = 0; j < seed.n; ++j) acc ^= seed.bits[offset + j] && x[j];
    out.set(i, acc);
  }
  return out;
}

struct Fraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  static Fraction reduced(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw std::invalid_argument("Fraction: zero denominator");
    const std::uint64_t g = std::gcd(num, den);
    return g == 0 ? Fraction{0, 1} : Fraction{num / g, den / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Fraction&, const Fraction&) = default;
};

// Exact Pr_S[hash(S, x) = hash(S, x')] over all 2^(n+l-1) seeds.
inline Fraction collision_probability_exhaustive(std::size_t n, std::size_t ell, const BitString& x,
                                                 const BitString& xp) {
  if (n < 1 || n > 12 || ell < 1 || ell > 6 || ell > n) {
    throw std::invalid_argument("collision_probability_exhaustive: need 1 <= ell <= min(n, 6), n <= 12");
  }
  if (x.size() != n || xp.size() != n) throw std::invalid_argument("collision_probability_exhaustive: length mismatch");
  if (x == xp) throw std::invalid_argument("collision_probability_exhaustive: inputs must differ");
  const std::size_t seed_len = n + ell - 1;
  const std::uint64_t total = std::uint64_t{1} << seed_len;
  std::uint64_t collisions = 0;
  for (std::uint64_t s = 0; s < total; ++s) {
    BitString bits(seed_len);
    for (std::size_t b = 0; b < seed_len; ++b) bits.set(b, (s >> (seed_len - 1 - b)) & 1U);
    const ToeplitzSeed seed(n, ell, std::move(bits));
    if (hash(seed, x) == hash(seed, xp)) ++collisions;
  }
  return Fraction::reduced(collisions, total);
}

}  // namespace qkd
