#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qkd/bits.hpp"
#include "qkd/mathcore.hpp"
#include "qkd/random.hpp"

namespace qkd {

inline constexpr std::size_t kMaxCodeLength = 32;

namespace detail {

// Bit string of length n <= 64 packed so that integer order equals lexicographic
// order: index i lives at bit position n - 1 - i.
inline std::uint64_t pack(const BitString& x) {
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mask = (mask << 1) | static_cast<std::uint64_t>(x[i]);
  return mask;
}

inline BitString unpack(std::uint64_t mask, std::size_t n) {
  BitString out(n);
  for (std::size_t i = 0; i < n; ++i) out.set(i, (mask >> (n - 1 - i)) & 1U);
  return out;
}

// Next integer with the same popcount (Gosper's hack).
inline std::uint64_t next_combination(std::uint64_t v) {
  const std::uint64_t c = v & (~v + 1);
  const std::uint64_t r = v + c;
  return (((r ^ v) >> 2) / c) | r;
}

inline std::size_t gf2_rank(std::vector<std::uint64_t> rows) {
  std::size_t rank = 0;
  for (int bit = 63; bit >= 0; --bit) {
    const std::uint64_t pivot_mask = std::uint64_t{1} << bit;
    std::size_t pivot = rank;
    while (pivot < rows.size() && !(rows[pivot] & pivot_mask)) ++pivot;
    if (pivot == rows.size()) continue;
    std::swap(rows[rank], rows[pivot]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i != rank && (rows[i] & pivot_mask)) rows[i] ^= rows[rank];
    }
    ++rank;
  }
  return rank;
}

// Calls visit(pattern) for every n-bit pattern of weight w in increasing order;
// stops early when visit returns true.
template <class Visit>
bool for_each_pattern(std::size_t n, std::size_t w, Visit&& visit) {
  if (w > n) return false;
  if (w == 0) return visit(std::uint64_t{0});
  const std::uint64_t limit = std::uint64_t{1} << n;
  for (std::uint64_t v = (std::uint64_t{1} << w) - 1; v < limit; v = next_combination(v)) {
    if (visit(v)) return true;
  }
  return false;
}

}  // namespace detail

// Binary linear code given by an r x n parity-check matrix of full row rank.
class LinearCode {
 public:
  static LinearCode from_parity(const std::vector<BitString>& rows) {
    if (rows.empty()) throw std::invalid_argument("LinearCode: parity matrix has no rows");
    const std::size_t n = rows.front().size();
    if (n < 2 || n > kMaxCodeLength) throw std::invalid_argument("LinearCode: n must be in [2, 32]");
    if (rows.size() >= n) throw std::invalid_argument("LinearCode: need r < n");
    std::vector<std::uint64_t> packed;
    for (const auto& row : rows) {
      if (row.size() != n) throw std::invalid_argument("LinearCode: ragged parity matrix");
      packed.push_back(detail::pack(row));
    }
    if (detail::gf2_rank(packed) != rows.size()) {
      throw std::invalid_argument("LinearCode: parity matrix is not full rank");
    }
    return LinearCode(n, std::move(packed));
  }

  std::size_t n() const { return n_; }
  std::size_t r() const { return rows_.size(); }
  std::size_t decode_radius() const { return radius_; }
  std::vector<BitString> parity() const {
    std::vector<BitString> out;
    for (auto row : rows_) out.push_back(detail::unpack(row, n_));
    return out;
  }

  std::uint64_t syndrome_mask(std::uint64_t x) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      s = (s << 1) | static_cast<std::uint64_t>(std::popcount(rows_[i] & x) & 1);
    }
    return s;
  }

  // Lexicographically smallest minimum-weight pattern with the given syndrome.
  std::uint64_t coset_leader(std::uint64_t syndrome) const {
    std::uint64_t found = 0;
    for (std::size_t w = 0; w <= n_; ++w) {
      const bool hit = detail::for_each_pattern(n_, w, [&](std::uint64_t e) {
        if (syndrome_mask(e) != syndrome) return false;
        found = e;
        return true;
      });
      if (hit) return found;
    }
    throw std::logic_error("LinearCode: syndrome not reachable");
  }

  friend bool operator==(const LinearCode& a, const LinearCode& b) {
    return a.n_ == b.n_ && a.rows_ == b.rows_;
  }

 private:
  LinearCode(std::size_t n, std::vector<std::uint64_t> rows) : n_(n), rows_(std::move(rows)) {
    radius_ = compute_radius();
  }

  // Largest w such that all patterns of weight <= w have distinct syndromes.
  std::size_t compute_radius() const {
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t w = 0; w <= n_; ++w) {
      const bool clash = detail::for_each_pattern(n_, w, [&](std::uint64_t e) {
        return !seen.insert(syndrome_mask(e)).second;
      });
      if (clash) return w == 0 ? 0 : w - 1;
    }
    return n_;
  }

  std::size_t n_ = 0;
  std::vector<std::uint64_t> rows_;
  std::size_t radius_ = 0;
};

inline LinearCode generate_code(std::size_t n, std::size_t r, RandomStream& rng) {
  if (!(r >= 1 && r < n && n <= kMaxCodeLength)) {
    throw std::invalid_argument("generate_code: need 1 <= r < n <= 32");
  }
  for (;;) {
    std::vector<BitString> rows;
    std::vector<std::uint64_t> packed;
    for (std::size_t i = 0; i < r; ++i) {
      rows.push_back(rng.bits(n));
      packed.push_back(detail::pack(rows.back()));
    }
    if (detail::gf2_rank(packed) == r) return LinearCode::from_parity(rows);
  }
}

inline BitString synd(const LinearCode& code, const BitString& x) {
  if (x.size() != code.n()) throw std::invalid_argument("synd: length mismatch");
  return detail::unpack(code.syndrome_mask(detail::pack(x)), code.r());
}

inline BitString corr(const LinearCode& code, const BitString& y, const BitString& z) {
  if (y.size() != code.n() || z.size() != code.r()) throw std::invalid_argument("corr: length mismatch");
  const std::uint64_t ym = detail::pack(y);
  const std::uint64_t target = code.syndrome_mask(ym) ^ detail::pack(z);
  return detail::unpack(ym ^ code.coset_leader(target), code.n());
}

// A short code applied independently to consecutive blocks of a long string;
// the final block is zero-padded.
class BlockCode {
 public:
  BlockCode(LinearCode inner, std::size_t n) : inner_(std::move(inner)), n_(n) {
    if (n_ == 0) throw std::invalid_argument("BlockCode: empty input length");
    blocks_ = (n_ + inner_.n() - 1) / inner_.n();
  }

  std::size_t n() const { return n_; }
  std::size_t r() const { return blocks_ * inner_.r(); }
  std::size_t blocks() const { return blocks_; }
  const LinearCode& inner() const { return inner_; }

  friend bool operator==(const BlockCode&, const BlockCode&) = default;

  // Block b of x, zero-padded to the inner length.
  BitString block(const BitString& x, std::size_t b) const {
    BitString out(inner_.n());
    for (std::size_t i = 0; i < inner_.n() && b * inner_.n() + i < n_; ++i) out.set(i, x[b * inner_.n() + i]);
    return out;
  }

 private:
  LinearCode inner_;
  std::size_t n_ = 0;
  std::size_t blocks_ = 0;
};

inline BitString synd(const BlockCode& code, const BitString& x) {
  if (x.size() != code.n()) throw std::invalid_argument("synd: length mismatch");
  BitString out;
  for (std::size_t b = 0; b < code.blocks(); ++b) {
    const BitString s = synd(code.inner(), code.block(x, b));
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back(s[i]);
  }
  return out;
}

inline BitString corr(const BlockCode& code, const BitString& y, const BitString& z) {
  if (y.size() != code.n() || z.size() != code.r()) throw std::invalid_argument("corr: length mismatch");
  const std::size_t r = code.inner().r();
  BitString out(code.n());
  for (std::size_t b = 0; b < code.blocks(); ++b) {
    BitString zb(r);
    for (std::size_t i = 0; i < r; ++i) zb.set(i, z[b * r + i]);
    const BitString fixed = corr(code.inner(), code.block(y, b), zb);
    for (std::size_t i = 0; i < fixed.size() && b * code.inner().n() + i < code.n(); ++i) {
      out.set(b * code.inner().n() + i, fixed[i]);
    }
  }
  return out;
}

template <class C>
concept SyndromeCode = requires(const C& c, const BitString& x) {
  { c.n() } -> std::convertible_to<std::size_t>;
  { c.r() } -> std::convertible_to<std::size_t>;
  { synd(c, x) } -> std::same_as<BitString>;
  { corr(c, x, x) } -> std::same_as<BitString>;
};

// r = ceil(factor * n * h(delta)), clamped to [1, n - 1].
inline std::size_t leakage_bits(std::size_t n, double delta, double factor) {
  if (n < 2) throw std::invalid_argument("leakage_bits: need n >= 2");
  if (!(factor >= 1.0)) throw std::invalid_argument("leakage_bits: factor must be at least 1");
  const double raw = std::ceil(factor * static_cast<double>(n) * binary_entropy(delta) - 1e-9);
  const double clamped = std::clamp(raw, 1.0, static_cast<double>(n - 1));
  return static_cast<std::size_t>(clamped);
}

}  // namespace qkd
