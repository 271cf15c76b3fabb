#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "qkd/channels.hpp"
#include "qkd/ecc.hpp"
#include "qkd/hashing.hpp"
#include "qkd/mathcore.hpp"
#include "qkd/parallel.hpp"
#include "qkd/protocol.hpp"
#include "qkd/qtoolbox.hpp"
#include "qkd/random.hpp"

namespace qkd {

struct SuiteLine {
  std::string label;
  double empirical = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::string name;
  std::vector<SuiteLine> lines;

  bool passed() const {
    return !lines.empty() && std::all_of(lines.begin(), lines.end(), [](const SuiteLine& l) { return l.pass; });
  }

  std::string text() const {
    std::string out;
    char buf[512];
    for (const auto& l : lines) {
      std::snprintf(buf, sizeof buf, "[%s] %s: %s empirical=%.12g bound=%.12g\n", l.pass ? "PASS" : "FAIL",
                    name.c_str(), l.label.c_str(), l.empirical, l.bound);
      out += buf;
    }
    return out;
  }
};

struct CorrectnessOptions {
  std::size_t trials = 100000;
  std::size_t t = 8;
  std::size_t threads = 1;
};

// Verification with x_hat != x forced by a nonzero codeword error, which the
// syndrome cannot see.
inline SuiteReport verify_correctness(std::uint64_t master, const CorrectnessOptions& opt = {}) {
  constexpr std::size_t kN = 16;
  constexpr std::size_t kR = 4;
  constexpr std::size_t kEll = 8;
  RandomStream code_rng = RandomStream::derive(master, "correctness-code", 0);
  const LinearCode code = generate_code(kN, kR, code_rng);

  struct Tally {
    std::uint64_t reached = 0;
    std::uint64_t undetected = 0;
    std::uint64_t keys_differ = 0;
  };
  constexpr std::size_t kChunk = 4096;
  const std::size_t chunks = (opt.trials + kChunk - 1) / kChunk;
  std::vector<Tally> tallies(chunks);
  parallel_for(chunks, opt.threads, [&](std::size_t c) {
    Tally& tally = tallies[c];
    for (std::size_t i = c * kChunk; i < std::min(opt.trials, (c + 1) * kChunk); ++i) {
      RandomStream rng = RandomStream::derive(master, "correctness", i);
      const BitString x = rng.bits(kN);
      BitString e;
      do {
        e = rng.bits(kN);
      } while (e.weight() == 0 || synd(code, e).weight() != 0);
      const ToeplitzSeed h_ec = sample_seed(kN, opt.t, rng);
      const ToeplitzSeed h_pa = sample_seed(kN, kEll, rng);
      const EcResult ec = error_correction(x, x ^ e, code, h_ec);
      if (ec.x_hat == x) continue;
      ++tally.reached;
      if (ec.flag == Flag::pass) {
        ++tally.undetected;
        const auto [k_a, k_b] = privacy_amplification(x, ec.x_hat, h_pa);
        if (k_a != k_b) ++tally.keys_differ;
      }
    }
  });
  Tally total;
  for (const auto& t : tallies) {
    total.reached += t.reached;
    total.undetected += t.undetected;
    total.keys_differ += t.keys_differ;
  }
  const double n = static_cast<double>(opt.trials);
  const double p = std::exp2(-static_cast<double>(opt.t));
  const double bound = p + 3.0 * std::sqrt(p * (1.0 - p) / n);
  SuiteReport report{"correctness", {}};
  report.lines.push_back({"runs reaching verification with x_hat != x", static_cast<double>(total.reached), n,
                          total.reached == opt.trials});
  report.lines.push_back({"Pr[pass and x_hat != x] (t=" + std::to_string(opt.t) + ")",
                          static_cast<double>(total.undetected) / n, bound,
                          static_cast<double>(total.undetected) / n <= bound});
  report.lines.push_back({"Pr[pass and K_A != K_B]", static_cast<double>(total.keys_differ) / n, bound,
                          static_cast<double>(total.keys_differ) / n <= bound});
  return report;
}

namespace detail {

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t out = 1;
  for (std::uint64_t i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

inline constexpr double kEventSlack = 1e-9;

// Lemma event {sum_pi z <= k delta  and  sum_rest z >= n (delta + nu)}, counted
// conservatively at the boundaries.
inline bool tail_event(std::uint64_t s_in, std::uint64_t s_out, std::uint64_t k, std::uint64_t n, double delta,
                       double nu) {
  return static_cast<double>(s_in) <= static_cast<double>(k) * delta + kEventSlack &&
         static_cast<double>(s_out) >= static_cast<double>(n) * (delta + nu) - kEventSlack;
}

// The delta-free event {sum_rest z / n >= sum_pi z / k + nu}.
inline bool deviation_event(std::uint64_t s_in, std::uint64_t s_out, std::uint64_t k, std::uint64_t n, double nu) {
  return static_cast<double>(s_out) / static_cast<double>(n) >=
         static_cast<double>(s_in) / static_cast<double>(k) + nu - kEventSlack;
}

}  // namespace detail

struct SerflingOptions {
  std::size_t mc_population = 10000;
  std::size_t mc_sample = 100;
  std::size_t mc_draws = 100000;
};

inline SuiteReport verify_serfling(std::uint64_t master, const SerflingOptions& opt = {}) {
  SuiteReport report{"serfling", {}};
  constexpr std::size_t kM = 30;
  const std::vector<double> deltas = {0.0, 0.1, 0.2, 0.3};
  const std::vector<double> nus = {0.05, 0.1, 0.2, 0.3, 0.5};

  RandomStream zr = RandomStream::derive(master, "serfling-z", 0);
  std::vector<std::pair<std::string, std::uint64_t>> patterns = {
      {"all-0", 0}, {"all-1", (std::uint64_t{1} << kM) - 1}, {"half-half", (std::uint64_t{1} << (kM / 2)) - 1},
      {"random", zr.next() & ((std::uint64_t{1} << kM) - 1)}};

  for (std::size_t k : {3, 5, 10}) {
    const std::size_t n = kM - k;
    std::vector<std::vector<std::uint64_t>> tally(patterns.size(), std::vector<std::uint64_t>(k + 1, 0));
    std::uint64_t subsets = 0;
    detail::for_each_pattern(kM, k, [&](std::uint64_t pi) {
      ++subsets;
      for (std::size_t p = 0; p < patterns.size(); ++p) ++tally[p][std::popcount(pi & patterns[p].second)];
      return false;
    });
    for (std::size_t p = 0; p < patterns.size(); ++p) {
      const auto w = static_cast<std::uint64_t>(std::popcount(patterns[p].second));
      bool hypergeometric = subsets == detail::binomial(kM, k);
      for (std::size_t s = 0; s <= k; ++s) {
        hypergeometric = hypergeometric && tally[p][s] == detail::binomial(w, s) * detail::binomial(kM - w, k - s);
      }
      const std::string tag = "m=30 k=" + std::to_string(k) + " z=" + patterns[p].first;
      report.lines.push_back({tag + " subset tallies match hypergeometric counts", static_cast<double>(subsets),
                              static_cast<double>(detail::binomial(kM, k)), hypergeometric});
      for (double nu : nus) {
        const double bound = serfling_tail(kM, k, nu).linear();
        std::uint64_t dev = 0;
        for (std::size_t s = 0; s <= k; ++s) {
          if (s <= w && detail::deviation_event(s, w - s, k, n, nu)) dev += tally[p][s];
        }
        const double dev_freq = static_cast<double>(dev) / static_cast<double>(subsets);
        char label[128];
        std::snprintf(label, sizeof label, " nu=%.2f deviation event", nu);
        report.lines.push_back({tag + label, dev_freq, bound, dev_freq <= bound});
        for (double delta : deltas) {
          std::uint64_t hits = 0;
          for (std::size_t s = 0; s <= k; ++s) {
            if (s <= w && detail::tail_event(s, w - s, k, n, delta, nu)) hits += tally[p][s];
          }
          const double freq = static_cast<double>(hits) / static_cast<double>(subsets);
          std::snprintf(label, sizeof label, " nu=%.2f delta=%.1f joint event", nu, delta);
          report.lines.push_back({tag + label, freq, bound, freq <= bound});
        }
      }
    }
  }

  // Monte Carlo at a population size beyond enumeration.
  const std::size_t m = opt.mc_population;
  const std::size_t k = opt.mc_sample;
  const std::size_t n = m - k;
  RandomStream mc_z = RandomStream::derive(master, "serfling-mc-z", 0);
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> populations;
  populations.push_back({"all-1", std::vector<std::uint8_t>(m, 1)});
  std::vector<std::uint8_t> half(m, 0);
  std::fill(half.begin(), half.begin() + static_cast<std::ptrdiff_t>(m / 2), 1);
  populations.push_back({"half-half", half});
  std::vector<std::uint8_t> sparse(m, 0);
  for (auto& v : sparse) v = mc_z.bernoulli(0.1);
  populations.push_back({"random(0.1)", sparse});

  for (const auto& [name, z] : populations) {
    const std::uint64_t w = std::accumulate(z.begin(), z.end(), std::uint64_t{0});
    RandomStream rng = RandomStream::derive(master, "serfling-mc", w);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (double nu : {0.1, 0.15, 0.2}) {
      std::uint64_t hits = 0;
      for (std::size_t draw = 0; draw < opt.mc_draws; ++draw) {
        std::uint64_t s_in = 0;
        for (std::size_t i = 0; i < k; ++i) {
          std::swap(perm[i], perm[i + rng.below(m - i)]);
          s_in += z[perm[i]];
        }
        if (detail::deviation_event(s_in, w - s_in, k, n, nu)) ++hits;
      }
      const double freq = static_cast<double>(hits) / static_cast<double>(opt.mc_draws);
      const double bound = serfling_tail(m, k, nu).linear();
      char label[160];
      std::snprintf(label, sizeof label, "Monte Carlo m=%zu k=%zu z=%s nu=%.2f deviation event", m, k, name.c_str(), nu);
      report.lines.push_back({label, freq, bound, freq <= bound});
    }
  }
  return report;
}

inline SuiteReport verify_universality(std::size_t max_n = 6, std::size_t max_ell = 3) {
  SuiteReport report{"universality", {}};
  for (std::size_t n = 1; n <= max_n; ++n) {
    for (std::size_t ell = 1; ell <= std::min(max_ell, n); ++ell) {
      const Fraction expected = Fraction::reduced(1, std::uint64_t{1} << ell);
      std::uint64_t pairs = 0;
      std::uint64_t exact = 0;
      for (std::uint64_t a = 0; a < (std::uint64_t{1} << n); ++a) {
        for (std::uint64_t b = a + 1; b < (std::uint64_t{1} << n); ++b) {
          ++pairs;
          if (collision_probability_exhaustive(n, ell, detail::unpack(a, n), detail::unpack(b, n)) == expected) ++exact;
        }
      }
      report.lines.push_back({"n=" + std::to_string(n) + " ell=" + std::to_string(ell) +
                                  " pairs with collision probability exactly 2^-ell",
                              static_cast<double>(exact), static_cast<double>(pairs), exact == pairs});
    }
  }
  return report;
}

// max over all n-subsets by enumeration, each mean taken in descending order.
inline double cbar_brute_force(const std::vector<double>& c, std::size_t n) {
  double best = 0.0;
  detail::for_each_pattern(c.size(), n, [&](std::uint64_t mask) {
    std::vector<double> chosen;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if ((mask >> i) & 1U) chosen.push_back(c[i]);
    }
    std::sort(chosen.begin(), chosen.end(), std::greater<>());
    best = std::max(best, geometric_mean_desc(chosen));
    return false;
  });
  return best;
}

inline SuiteReport verify_overlap(std::uint64_t master, std::size_t random_lists = 200) {
  SuiteReport report{"overlap", {}};
  const auto meas = bb84_measurements();
  const double c = overlap_c(meas[0], meas[1]);
  report.lines.push_back({"c for BB84 measurements", c, 0.5, std::abs(c - 0.5) <= 1e-12});
  const double cp = overlap_cprime(PreparedStateFamily::bb84());
  report.lines.push_back({"c' for BB84 states", cp, 0.5, std::abs(cp - 0.5) <= 1e-12});

  RandomStream rng = RandomStream::derive(master, "overlap-cbar", 0);
  std::uint64_t checked = 0;
  std::uint64_t matched = 0;
  for (std::size_t trial = 0; trial < random_lists; ++trial) {
    const std::size_t len = 1 + trial % 12;
    std::vector<double> values(len);
    for (auto& v : values) v = rng.bernoulli(0.2) ? 0.5 : rng.uniform();
    for (std::size_t n = 1; n <= len; ++n) {
      ++checked;
      if (cbar_bound(values, n) == cbar_brute_force(values, n)) ++matched;
    }
  }
  report.lines.push_back({"cbar_bound equal to subset brute force (lists of length <= 12)",
                          static_cast<double>(matched), static_cast<double>(checked), matched == checked});
  return report;
}

struct ReductionOptions {
  std::size_t M = 6;
  std::size_t m = 3;
  std::size_t k = 1;
  double delta = 0.1;
};

struct ReductionResult {
  std::uint64_t pm_pass_weight = 0;
  std::uint64_t pm_total_weight = 0;
  std::uint64_t eb_total_weight = 0;
  std::size_t outcomes = 0;
  std::size_t mismatched = 0;
  double total_variation = 0.0;
};

namespace detail {

inline std::string reduction_key(const BitString& phi, const BitString& v, const BitString& w, const BitString& x,
                                 const BitString& y, Flag f_pe) {
  return phi.to_string() + "|" + v.to_string() + "|" + w.to_string() + "|" + x.to_string() + "|" + y.to_string() +
         "|" + std::string(to_string(f_pe));
}

// Probability scaled to an integer numerator over `scale`; throws if not exact.
inline std::uint64_t exact_numerator(double p, double scale) {
  const double v = p * scale;
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-12) throw std::invalid_argument("reduction: probability is not a multiple of 1/scale");
  return static_cast<std::uint64_t>(r);
}

inline std::vector<IndexSet> all_subsets(std::size_t m, std::size_t k) {
  std::vector<IndexSet> out;
  for_each_pattern(m, k, [&](std::uint64_t mask) {
    IndexSet s;
    for (std::size_t i = 0; i < m; ++i) {
      if ((mask >> i) & 1U) s.push_back(i);
    }
    out.push_back(s);
    return false;
  });
  return out;
}

}  // namespace detail

// Exact joint law of (S^Phi, V, W, X, Y, F_pe): PM over a lossless noiseless
// channel conditioned on sifting passing, against EB on a noiseless source.
inline ReductionResult exact_reduction(const ReductionOptions& opt = {}) {
  const ChannelModel channel{ChannelVariant::pm_honest, 0.0, 1.0, 0.0};
  const std::size_t M = opt.M;
  const auto subsets = detail::all_subsets(opt.m, opt.k);
  std::map<std::string, std::uint64_t> pm;
  std::map<std::string, std::uint64_t> eb;
  ReductionResult res;

  for (std::uint64_t fa = 0; fa < (std::uint64_t{1} << M); ++fa) {
    for (std::uint64_t fb = 0; fb < (std::uint64_t{1} << M); ++fb) {
      for (std::uint64_t rr = 0; rr < (std::uint64_t{1} << M); ++rr) {
        const BitString phi_a = detail::unpack(fa, M);
        const BitString phi_b = detail::unpack(fb, M);
        const BitString r = detail::unpack(rr, M);
        // Per-round outcome options with integer weights over 2.
        std::vector<std::vector<std::pair<Detection, std::uint64_t>>> options(M);
        for (std::size_t i = 0; i < M; ++i) {
          const auto probs = pm_outcome_probabilities(channel, r[i], phi_a[i], phi_b[i]);
          for (int d = 0; d < 3; ++d) {
            const std::uint64_t num = detail::exact_numerator(probs[static_cast<std::size_t>(d)], 2.0);
            if (num) options[i].push_back({static_cast<Detection>(d), num});
          }
        }
        std::vector<std::size_t> digit(M, 0);
        for (;;) {
          TernaryString u(M);
          std::uint64_t weight = 1;
          for (std::size_t i = 0; i < M; ++i) {
            u[i] = options[i][digit[i]].first;
            weight *= options[i][digit[i]].second;
          }
          res.pm_total_weight += weight * subsets.size();
          const SiftResult s = sift(phi_a, phi_b, conclusive_indices(u), opt.m);
          if (s.flag == Flag::pass) {
            const BitString phi = phi_a.select(s.sigma);
            const BitString x_raw = r.select(s.sigma);
            BitString y_raw(opt.m);
            for (std::size_t j = 0; j < opt.m; ++j) y_raw.set(j, u[s.sigma[j]] == Detection::one);
            for (const auto& pi : subsets) {
              const auto [v, x] = reorder(x_raw, pi);
              const auto [w, y] = reorder(y_raw, pi);
              pm[detail::reduction_key(phi, v, w, x, y, parameter_estimation(v, w, opt.delta))] += weight;
              res.pm_pass_weight += weight;
            }
          }
          std::size_t pos = 0;
          while (pos < M && ++digit[pos] == options[pos].size()) digit[pos++] = 0;
          if (pos == M) break;
        }
      }
    }
  }

  const ChannelModel source{ChannelVariant::eb_honest, 0.0, 1.0, 0.0};
  for (std::uint64_t f = 0; f < (std::uint64_t{1} << opt.m); ++f) {
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << opt.m); ++a) {
      for (std::uint64_t b = 0; b < (std::uint64_t{1} << opt.m); ++b) {
        std::uint64_t weight = 1;
        for (std::size_t i = 0; i < opt.m; ++i) {
          const bool flip = ((a ^ b) >> i) & 1U;
          weight *= detail::exact_numerator(flip ? source.qber : 1.0 - source.qber, 2.0);
        }
        if (weight == 0) continue;
        const BitString phi = detail::unpack(f, opt.m);
        const BitString x_raw = detail::unpack(a, opt.m);
        const BitString y_raw = detail::unpack(b, opt.m);
        for (const auto& pi : subsets) {
          const auto [v, x] = reorder(x_raw, pi);
          const auto [w, y] = reorder(y_raw, pi);
          eb[detail::reduction_key(phi, v, w, x, y, parameter_estimation(v, w, opt.delta))] += weight;
          res.eb_total_weight += weight;
        }
      }
    }
  }

  std::map<std::string, bool> keys;
  for (const auto& [key, _] : pm) keys[key] = true;
  for (const auto& [key, _] : eb) keys[key] = true;
  res.outcomes = keys.size();
  double tv = 0.0;
  for (const auto& [key, _] : keys) {
    const auto ip = pm.find(key);
    const auto ie = eb.find(key);
    const std::uint64_t cp = ip == pm.end() ? 0 : ip->second;
    const std::uint64_t ce = ie == eb.end() ? 0 : ie->second;
    const unsigned __int128 lhs = static_cast<unsigned __int128>(cp) * res.eb_total_weight;
    const unsigned __int128 rhs = static_cast<unsigned __int128>(ce) * res.pm_pass_weight;
    if (lhs != rhs) {
      ++res.mismatched;
      tv += std::abs(static_cast<double>(cp) / static_cast<double>(res.pm_pass_weight) -
                     static_cast<double>(ce) / static_cast<double>(res.eb_total_weight));
    }
  }
  res.total_variation = 0.5 * tv;
  return res;
}

inline SuiteReport verify_reduction(const ReductionOptions& opt = {}) {
  const ReductionResult res = exact_reduction(opt);
  SuiteReport report{"reduction", {}};
  char label[160];
  std::snprintf(label, sizeof label, "M=%zu m=%zu k=%zu outcomes with unequal probability", opt.M, opt.m, opt.k);
  report.lines.push_back({label, static_cast<double>(res.mismatched), 0.0, res.mismatched == 0});
  report.lines.push_back({"total variation distance", res.total_variation, 0.0, res.total_variation == 0.0});
  // Lossless and noiseless: sifting passes iff at least m of the M bases match.
  std::uint64_t matching = 0;
  for (std::size_t j = opt.m; j <= opt.M; ++j) matching += detail::binomial(opt.M, j);
  const unsigned __int128 lhs = static_cast<unsigned __int128>(res.pm_pass_weight) << opt.M;
  const unsigned __int128 rhs = static_cast<unsigned __int128>(matching) * res.pm_total_weight;
  report.lines.push_back({"Pr[sifting passes] against P[Bin(M, 1/2) >= m]",
                          static_cast<double>(res.pm_pass_weight) / static_cast<double>(res.pm_total_weight),
                          std::ldexp(static_cast<double>(matching), -static_cast<int>(opt.M)), lhs == rhs});
  return report;
}

}  // namespace qkd
