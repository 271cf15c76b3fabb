#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/ecc.hpp"
#include "qkd/mathcore.hpp"
#include "qkd/parallel.hpp"
#include "qkd/security.hpp"

namespace qkd {

struct RateQuery {
  std::uint64_t m = 0;
  double delta = 0.0;
  LogProb eps_target = LogProb::from_log2(-std::log2(1e10));
  double cbar = 0.5;
  double leakage_factor = 1.1;

  void validate() const {
    if (m < 4) throw std::invalid_argument("RateQuery: m must be at least 4");
    if (!(delta > 0.0 && delta < 0.5)) throw std::invalid_argument("RateQuery: delta outside (0, 1/2)");
    if (!(eps_target.log2() < 0.0)) throw std::invalid_argument("RateQuery: eps_target must be below 1");
    if (!(cbar > 0.0 && cbar < 1.0)) throw std::invalid_argument("RateQuery: cbar outside (0, 1)");
    if (!(leakage_factor >= 1.0)) throw std::invalid_argument("RateQuery: leakage factor must be at least 1");
  }
};

struct RatePoint {
  std::uint64_t m = 0;
  double delta = 0.0;
  std::uint64_t ell = 0;
  double rate = 0.0;
  std::uint64_t k_star = 0;
  std::uint64_t t_star = 0;
  std::uint64_t r = 0;
  double nu_star = 0.0;
  EpsilonBreakdown eps;
  bool infeasible = true;
};

inline constexpr int kGridPoints = 60;
inline constexpr std::uint64_t kTExtra = 20;

namespace detail {

struct Candidate {
  std::uint64_t k = 0;
  std::uint64_t t = 0;
  std::uint64_t r = 0;
  std::uint64_t ell = 0;
};

inline std::vector<std::uint64_t> k_grid(std::uint64_t m) {
  const std::uint64_t hi = m / 2;
  const std::uint64_t lo = std::min<std::uint64_t>(16, hi);
  std::vector<std::uint64_t> out;
  for (int i = 0; i < kGridPoints; ++i) {
    const double frac = static_cast<double>(i) / (kGridPoints - 1);
    const double v = std::exp(std::log(static_cast<double>(lo)) +
                              frac * (std::log(static_cast<double>(hi)) - std::log(static_cast<double>(lo))));
    out.push_back(std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(v)), lo, hi));
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline ProtocolParams params_for(const RateQuery& q, std::uint64_t k, std::uint64_t r, std::uint64_t t,
                                 std::uint64_t ell) {
  return ProtocolParams{q.m, k, q.delta, r, t, ell, q.cbar};
}

inline bool feasible(const RateQuery& q, std::uint64_t k, std::uint64_t r, std::uint64_t t, std::uint64_t ell) {
  return total_security(params_for(q, k, r, t, ell)).eps_total <= q.eps_target;
}

// Largest feasible ell for fixed (k, t), or 0.
inline std::uint64_t best_ell(const RateQuery& q, std::uint64_t k, std::uint64_t r, std::uint64_t t) {
  const std::uint64_t n = q.m - k;
  const double cap = std::floor(static_cast<double>(n) * -std::log2(q.cbar)) - static_cast<double>(r) -
                     static_cast<double>(t);
  if (cap < 1.0) return 0;
  std::uint64_t hi = std::min<std::uint64_t>(n, static_cast<std::uint64_t>(cap));
  if (!feasible(q, k, r, t, 1)) return 0;
  std::uint64_t lo = 1;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo + 1) / 2;
    if (feasible(q, k, r, t, mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

inline Candidate best_for_k(const RateQuery& q, std::uint64_t k) {
  Candidate best{k, 0, 0, 0};
  const std::uint64_t n = q.m - k;
  if (n < 2) return best;
  const std::uint64_t r = leakage_bits(n, q.delta, q.leakage_factor);
  const auto t0 = static_cast<std::uint64_t>(std::max(1.0, std::ceil(-q.eps_target.log2())));
  for (std::uint64_t t = t0; t <= t0 + kTExtra; ++t) {
    if (eps_ec(t) >= q.eps_target) continue;
    const std::uint64_t ell = best_ell(q, k, r, t);
    if (ell > best.ell) best = Candidate{k, t, r, ell};
  }
  return best;
}

}  // namespace detail

// Largest ell with eps_ec + eps_pe + eps_pa <= target over a search of (k, t, nu).
inline RatePoint max_key_length(const RateQuery& q) {
  q.validate();
  const auto grid = detail::k_grid(q.m);
  std::vector<detail::Candidate> scored;
  scored.reserve(grid.size());
  for (auto k : grid) scored.push_back(detail::best_for_k(q, k));

  std::size_t best_idx = 0;
  for (std::size_t i = 1; i < scored.size(); ++i) {
    if (scored[i].ell > scored[best_idx].ell) best_idx = i;
  }
  detail::Candidate best = scored[best_idx];

  if (best.ell > 0) {
    // Discrete golden-section refinement of k between the neighbouring grid points.
    std::uint64_t a = grid[best_idx == 0 ? 0 : best_idx - 1];
    std::uint64_t b = grid[std::min(best_idx + 1, grid.size() - 1)];
    auto score = [&](std::uint64_t k) {
      const auto c = detail::best_for_k(q, k);
      if (c.ell > best.ell) best = c;
      return c.ell;
    };
    while (b - a > 3) {
      const std::uint64_t c = a + (b - a) * 382 / 1000;
      const std::uint64_t d = a + (b - a) * 618 / 1000;
      if (c == d) break;
      if (score(c) >= score(d)) {
        b = d;
      } else {
        a = c;
      }
    }
    for (std::uint64_t k = a; k <= b; ++k) score(k);
  }

  RatePoint out;
  out.m = q.m;
  out.delta = q.delta;
  if (best.ell == 0) return out;
  const ProtocolParams p = detail::params_for(q, best.k, best.r, best.t, best.ell);
  const EpsilonBreakdown eps = total_security(p);
  if (!(eps.eps_total <= q.eps_target)) throw std::logic_error("max_key_length: chosen point failed re-verification");
  out.ell = best.ell;
  out.rate = static_cast<double>(best.ell) / static_cast<double>(q.m);
  out.k_star = best.k;
  out.t_star = best.t;
  out.r = best.r;
  out.nu_star = eps.nu;
  out.eps = eps;
  out.infeasible = false;
  return out;
}

// One point per (m, delta), ordered delta-major.
inline std::vector<RatePoint> rate_curve(const std::vector<std::uint64_t>& m_values,
                                         const std::vector<double>& delta_values, const RateQuery& tmpl,
                                         std::size_t threads = 1) {
  std::vector<RateQuery> queries;
  for (double delta : delta_values) {
    for (auto m : m_values) {
      RateQuery q = tmpl;
      q.m = m;
      q.delta = delta;
      q.validate();
      queries.push_back(q);
    }
  }
  std::vector<RatePoint> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = max_key_length(queries[i]); });
  return out;
}

inline std::string format_log2(LogProb p) {
  if (p.is_zero()) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", p.log2());
  return buf;
}

inline constexpr const char* kCurveHeader = "m,delta,ell,rate,k,t,nu,log2_eps_total,asymptote";

inline std::string curve_csv(const std::vector<RatePoint>& points, double cbar) {
  std::string out = kCurveHeader;
  out += '\n';
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%llu,%.6g,%llu,%.9f,%llu,%llu,%.9g,%s,%.9f\n",
                  static_cast<unsigned long long>(p.m), p.delta, static_cast<unsigned long long>(p.ell), p.rate,
                  static_cast<unsigned long long>(p.k_star), static_cast<unsigned long long>(p.t_star), p.nu_star,
                  format_log2(p.eps.eps_total).c_str(), asymptotic_rate(p.delta, cbar));
    out += buf;
  }
  return out;
}

struct Crossing {
  double delta = 0.0;
  std::optional<std::uint64_t> m;
};

// Smallest m in the grid whose rate reaches half the asymptotic rate, per delta.
inline std::vector<Crossing> half_asymptote_crossings(const std::vector<RatePoint>& points, double cbar) {
  std::vector<Crossing> out;
  for (const auto& p : points) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Crossing& c) { return c.delta == p.delta; });
    if (it == out.end()) {
      out.push_back(Crossing{p.delta, std::nullopt});
      it = std::prev(out.end());
    }
    if (p.rate >= 0.5 * asymptotic_rate(p.delta, cbar) && (!it->m || p.m < *it->m)) it->m = p.m;
  }
  return out;
}

}  // namespace qkd
