#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "qkd/mathcore.hpp"

namespace qkd {

struct ProtocolParams {
  std::uint64_t m = 0;
  std::uint64_t k = 0;
  double delta = 0.0;
  std::uint64_t r = 0;
  std::uint64_t t = 0;
  std::uint64_t ell = 0;
  double cbar = 0.5;

  std::uint64_t n() const { return m - k; }

  void validate() const {
    if (!(k > 0 && k < m)) throw std::invalid_argument("ProtocolParams: need 0 < k < m");
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("ProtocolParams: delta outside (0, 1/2)");
    if (t < 1) throw std::invalid_argument("ProtocolParams: need t >= 1");
    if (ell > n()) throw std::invalid_argument("ProtocolParams: ell exceeds n");
    if (!(cbar > 0.0 && cbar < 1.0)) throw std::invalid_argument("ProtocolParams: cbar outside (0, 1)");
    if (r >= n()) throw std::invalid_argument("ProtocolParams: need r < n");
  }

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

struct EpsilonBreakdown {
  LogProb eps_ec;
  LogProb eps_pe;
  LogProb eps_pa;
  double nu = 0.0;
  LogProb eps_secrecy;
  LogProb eps_total;

  bool vacuous() const { return eps_total.is_vacuous(); }
};

inline LogProb eps_ec(std::uint64_t t) {
  if (t < 1) throw std::invalid_argument("eps_ec: need t >= 1");
  return LogProb::from_log2(-static_cast<double>(t));
}

// exp(-(m-k) k^2 nu^2 / (m (k+1)))
inline LogProb epsilon_nu(double nu, std::uint64_t m, std::uint64_t k) {
  if (!(nu > 0.0)) throw std::domain_error("epsilon_nu: nu must be positive");
  if (!(k > 0 && k < m)) throw std::domain_error("epsilon_nu: need 0 < k < m");
  const double n = static_cast<double>(m - k);
  const double kd = static_cast<double>(k);
  const double exponent = (n / static_cast<double>(m)) * kd * (kd / (kd + 1.0)) * nu * nu;
  return LogProb::from_log2(-exponent / std::numbers::ln2);
}

// 2 exp(-(m-k) k^2 nu^2 / (m (k+1)))
inline LogProb eps_pe(double nu, std::uint64_t m, std::uint64_t k) {
  return LogProb::from_log2(1.0 + epsilon_nu(nu, m, k).log2());
}

// The privacy-amplification margin g = n (log2(1/cbar) - h(delta + nu)) - r - t - ell.
inline double pa_margin(double nu, const ProtocolParams& p) {
  const double q = -std::log2(p.cbar) - binary_entropy(p.delta + nu);
  return static_cast<double>(p.n()) * q - static_cast<double>(p.r) - static_cast<double>(p.t) -
         static_cast<double>(p.ell);
}

// (1/2) 2^(-g/2)
inline LogProb eps_pa(double nu, const ProtocolParams& p) {
  if (!(nu > 0.0 && nu < 0.5 - p.delta)) throw std::domain_error("eps_pa: nu outside (0, 1/2 - delta)");
  return LogProb::from_log2(-1.0 - 0.5 * pa_margin(nu, p));
}

inline constexpr double kNuMargin = 1e-6;
inline constexpr int kGoldenIterations = 80;
inline constexpr int kSafetyGridPoints = 64;

// inf over nu of eps_pe(nu) + eps_pa(nu). The result is always an evaluated
// point, so it remains a valid upper bound.
inline EpsilonBreakdown secrecy_bound(const ProtocolParams& p) {
  p.validate();
  const double lo = std::log(kNuMargin);
  const double hi = std::log(0.5 - p.delta - kNuMargin);

  EpsilonBreakdown best;
  best.eps_secrecy = LogProb::from_log2(std::numeric_limits<double>::infinity());
  auto evaluate = [&](double log_nu) {
    const double nu = std::exp(log_nu);
    const LogProb pe = eps_pe(nu, p.m, p.k);
    const LogProb pa = eps_pa(nu, p);
    const LogProb sum = pe + pa;
    if (sum < best.eps_secrecy) {
      best.eps_pe = pe;
      best.eps_pa = pa;
      best.nu = nu;
      best.eps_secrecy = sum;
    }
    return sum.log2();
  };

  if (hi > lo) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double c = b - kInvPhi * (b - a);
    double d = a + kInvPhi * (b - a);
    double fc = evaluate(c);
    double fd = evaluate(d);
    for (int i = 0; i < kGoldenIterations; ++i) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kInvPhi * (b - a);
        fc = evaluate(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kInvPhi * (b - a);
        fd = evaluate(d);
      }
    }
    for (int i = 0; i < kSafetyGridPoints; ++i) {
      evaluate(lo + (hi - lo) * static_cast<double>(i) / (kSafetyGridPoints - 1));
    }
  } else {
    evaluate(std::log(0.5 * (0.5 - p.delta)));
  }
  best.eps_total = best.eps_secrecy;
  return best;
}

inline EpsilonBreakdown total_security(const ProtocolParams& p) {
  EpsilonBreakdown out = secrecy_bound(p);
  out.eps_ec = eps_ec(p.t);
  out.eps_total = out.eps_ec + out.eps_secrecy;
  return out;
}

// log2(1/cbar) - 2 h(delta)
inline double asymptotic_rate(double delta, double cbar) {
  if (!(delta >= 0.0 && delta < 0.5)) throw std::domain_error("asymptotic_rate: delta outside [0, 1/2)");
  if (!(cbar > 0.0 && cbar < 1.0)) throw std::domain_error("asymptotic_rate: cbar outside (0, 1)");
  return -std::log2(cbar) - 2.0 * binary_entropy(delta);
}

}  // namespace qkd
