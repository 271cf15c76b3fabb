#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>

namespace qkd {

// A non-negative quantity stored as its base-2 logarithm. Bounds may exceed 1
// (log2 > 0); such values carry no guarantee.
class LogProb {
 public:
  constexpr LogProb() : log2_(-std::numeric_limits<double>::infinity()) {}

  static constexpr LogProb from_log2(double log2_value) { return LogProb(log2_value); }
  static LogProb from_linear(double p) {
    if (!(p >= 0.0)) throw std::domain_error("LogProb: negative or NaN probability");
    return LogProb(std::log2(p));
  }
  static constexpr LogProb zero() { return LogProb(); }
  static constexpr LogProb one() { return LogProb(0.0); }

  constexpr double log2() const { return log2_; }
  double linear() const { return std::exp2(log2_); }
  // Base-10 exponent, convenient for printing values like 1e-300 and below.
  double log10() const { return log2_ * std::numbers::ln2 / std::numbers::ln10; }
  constexpr bool is_zero() const { return log2_ == -std::numeric_limits<double>::infinity(); }
  // True when the value is >= 1, i.e. the bound says nothing.
  constexpr bool is_vacuous() const { return log2_ >= 0.0; }

  friend LogProb operator+(LogProb a, LogProb b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    const double hi = std::max(a.log2_, b.log2_);
    const double lo = std::min(a.log2_, b.log2_);
    return LogProb(hi + std::log1p(std::exp2(lo - hi)) / std::numbers::ln2);
  }
  LogProb& operator+=(LogProb other) { return *this = *this + other; }

  friend LogProb operator*(LogProb a, LogProb b) {
    if (a.is_zero() || b.is_zero()) return zero();
    return LogProb(a.log2_ + b.log2_);
  }

  friend constexpr bool operator==(LogProb a, LogProb b) { return a.log2_ == b.log2_; }
  friend constexpr auto operator<=>(LogProb a, LogProb b) { return a.log2_ <=> b.log2_; }

 private:
  constexpr explicit LogProb(double v) : log2_(v) {}
  double log2_;
};

// h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0.
inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("binary_entropy: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

namespace detail {

inline double log2_big(const boost::multiprecision::cpp_int& value) {
  using boost::multiprecision::msb;
  if (value <= 0) throw std::domain_error("log2_big: non-positive argument");
  const unsigned top = static_cast<unsigned>(msb(value));
  const unsigned shift = top > 62 ? top - 62 : 0;
  const boost::multiprecision::cpp_int head = value >> shift;
  return std::log2(head.convert_to<double>()) + static_cast<double>(shift);
}

// floor(n f) robust to f having been computed as lambda / n in floating point.
inline std::uint64_t floor_product(std::uint64_t n, double f) {
  const double prod = static_cast<double>(n) * f;
  return static_cast<std::uint64_t>(std::floor(prod + 1e-9 * std::max(1.0, prod)));
}

}  // namespace detail

inline constexpr std::uint64_t kExactHammingLimit = 10000;

// log2 of the Hamming-ball volume sum_{l=0}^{floor(n f)} C(n, l). Exact big-integer
// summation for n <= 10^4; above that, the sum is accumulated downward from the
// largest term using the ratio C(n, l-1) / C(n, l) = l / (n - l + 1).
inline double hamming_ball_log2(std::uint64_t n, double f) {
  if (n < 1) throw std::domain_error("hamming_ball_log2: n must be positive");
  if (!(f >= 0.0 && f <= 0.5)) throw std::domain_error("hamming_ball_log2: f outside [0, 1/2]");
  const std::uint64_t radius = std::min(detail::floor_product(n, f), n / 2);

  if (n <= kExactHammingLimit) {
    boost::multiprecision::cpp_int term = 1;
    boost::multiprecision::cpp_int sum = 1;
    for (std::uint64_t l = 0; l < radius; ++l) {
      term = term * (n - l) / (l + 1);
      sum += term;
    }
    return detail::log2_big(sum);
  }

  const double nd = static_cast<double>(n);
  const double rd = static_cast<double>(radius);
  const double log2_top =
      (std::lgamma(nd + 1.0) - std::lgamma(rd + 1.0) - std::lgamma(nd - rd + 1.0)) /
      std::numbers::ln2;
  double ratio_sum = 1.0;
  double term = 1.0;
  for (std::uint64_t l = radius; l >= 1; --l) {
    term *= static_cast<double>(l) / (nd - static_cast<double>(l) + 1.0);
    ratio_sum += term;
    if (term < 1e-18 * ratio_sum) break;
  }
  return log2_top + std::log2(ratio_sum);
}

// Tail bound for sampling without replacement:
//   exp(-2 nu^2 n k^2 / ((n + k)(k + 1))),  n = m - k,
// valid for any distribution of the sampled population.
inline LogProb serfling_tail(std::uint64_t m, std::uint64_t k, double nu) {
  if (!(k > 0 && k < m)) throw std::domain_error("serfling_tail: need 0 < k < m");
  if (!(nu > 0.0)) throw std::domain_error("serfling_tail: nu must be positive");
  const double n = static_cast<double>(m - k);
  const double kd = static_cast<double>(k);
  const double md = static_cast<double>(m);
  const double exponent = 2.0 * nu * nu * (n / md) * kd * (kd / (kd + 1.0));
  return LogProb::from_log2(-exponent / std::numbers::ln2);
}

}  // namespace qkd
