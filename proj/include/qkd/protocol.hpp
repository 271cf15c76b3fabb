#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qkd/bits.hpp"
#include "qkd/channels.hpp"
#include "qkd/ecc.hpp"
#include "qkd/hashing.hpp"
#include "qkd/random.hpp"
#include "qkd/security.hpp"

namespace qkd {

enum class Flag { pass, abort, absent };

inline std::string_view to_string(Flag f) {
  switch (f) {
    case Flag::pass: return "pass";
    case Flag::abort: return "abort";
    case Flag::absent: return "absent";
  }
  throw std::invalid_argument("Flag: unknown value");
}

inline Flag parse_flag(std::string_view text) {
  if (text == "pass") return Flag::pass;
  if (text == "abort") return Flag::abort;
  if (text == "absent") return Flag::absent;
  throw std::invalid_argument("Flag: unknown value '" + std::string(text) + "'");
}

using IndexSet = std::vector<std::size_t>;

struct Seeds {
  BitString phi;
  IndexSet pi;
  ToeplitzSeed h_ec;
  ToeplitzSeed h_pa;
  BitString phi_a;
  BitString phi_b;
  BitString r_pad;

  friend bool operator==(const Seeds&, const Seeds&) = default;
};

struct Transcript {
  BitString c_v;
  BitString c_z;
  BitString c_t;
  IndexSet c_omega;
  IndexSet c_sigma;
  BitString s_phi_b;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

struct Flags {
  Flag f_si = Flag::absent;
  Flag f_pe = Flag::abort;
  Flag f_ec = Flag::abort;

  bool all_pass() const { return f_si != Flag::abort && f_pe == Flag::pass && f_ec == Flag::pass; }
  friend bool operator==(const Flags&, const Flags&) = default;
};

struct ProtocolOutput {
  BitString k_a;
  BitString k_b;
  Seeds seeds;
  Transcript transcript;
  Flags flags;
  // Errors observed in the parameter-estimation sample (not part of the protocol registers).
  std::size_t pe_errors = 0;

  friend bool operator==(const ProtocolOutput&, const ProtocolOutput&) = default;
};

struct TraceEvent {
  std::string step;
  std::vector<std::pair<std::string, std::string>> fields;
};

using TraceSink = std::function<void(const TraceEvent&)>;

namespace detail {

inline void emit(const TraceSink& sink, std::string step, std::vector<std::pair<std::string, std::string>> fields) {
  if (sink) sink(TraceEvent{std::move(step), std::move(fields)});
}

inline std::string join_indices(const IndexSet& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out;
}

inline void require_runnable(const ProtocolParams& p) {
  p.validate();
  if (p.ell < 1) throw std::invalid_argument("protocol: need ell >= 1");
  if (p.t > p.n()) throw std::invalid_argument("protocol: need t <= n");
}

}  // namespace detail

// Order: Phi, Pi, H_ec, H_pa.
inline Seeds sample_seeds(const ProtocolParams& p, RandomStream& rng) {
  detail::require_runnable(p);
  Seeds s;
  s.phi = rng.bits(p.m);
  s.pi = sample_subset(p.m, p.k, rng);
  s.h_ec = sample_seed(p.n(), p.t, rng);
  s.h_pa = sample_seed(p.n(), p.ell, rng);
  return s;
}

// (raw restricted to pi, raw restricted to the complement), both in increasing index order.
inline std::pair<BitString, BitString> reorder(const BitString& raw, const IndexSet& pi) {
  std::vector<bool> in_pi(raw.size(), false);
  for (std::size_t idx : pi) {
    if (idx >= raw.size()) throw std::out_of_range("reorder: index out of range");
    if (in_pi[idx]) throw std::invalid_argument("reorder: repeated index");
    in_pi[idx] = true;
  }
  BitString pe;
  BitString key;
  for (std::size_t i = 0; i < raw.size(); ++i) (in_pi[i] ? pe : key).push_back(raw[i]);
  return {pe, key};
}

inline constexpr double kThresholdSlack = 1e-9;

// Aborts iff the number of disagreements is at least k * delta.
inline Flag parameter_estimation(const BitString& v, const BitString& w, double delta) {
  const std::size_t errors = hamming_distance(v, w);
  const double threshold = static_cast<double>(v.size()) * delta;
  return static_cast<double>(errors) >= threshold - kThresholdSlack ? Flag::abort : Flag::pass;
}

struct EcResult {
  BitString x_hat;
  BitString c_z;
  BitString c_t;
  Flag flag = Flag::abort;
};

template <SyndromeCode Code>
EcResult error_correction(const BitString& x, const BitString& y, const Code& code, const ToeplitzSeed& h_ec) {
  if (x.size() != y.size() || code.n() != x.size() || h_ec.n != x.size()) {
    throw std::invalid_argument("error_correction: length mismatch");
  }
  EcResult out;
  out.c_z = synd(code, x);
  out.x_hat = corr(code, y, out.c_z);
  out.c_t = hash(h_ec, x);
  out.flag = hash(h_ec, out.x_hat) == out.c_t ? Flag::pass : Flag::abort;
  return out;
}

inline std::pair<BitString, BitString> privacy_amplification(const BitString& x, const BitString& x_hat,
                                                              const ToeplitzSeed& h_pa) {
  if (x.size() != h_pa.n || x_hat.size() != h_pa.n) throw std::invalid_argument("privacy_amplification: length mismatch");
  return {hash(h_pa, x), hash(h_pa, x_hat)};
}

// Parameter estimation, error correction and privacy amplification on raw keys
// measured in the bases seeds.phi. Registers after an abort are zero-filled and
// downstream flags are set to abort.
template <SyndromeCode Code>
ProtocolOutput eb_postprocess(const ProtocolParams& p, const Seeds& seeds, const BitString& x_raw,
                              const BitString& y_raw, const Code& code, const TraceSink& trace = {}) {
  if (x_raw.size() != p.m || y_raw.size() != p.m) throw std::invalid_argument("eb_postprocess: raw key length mismatch");
  if (code.n() != p.n() || code.r() != p.r) throw std::invalid_argument("eb_postprocess: code does not match params");

  ProtocolOutput out;
  out.seeds = seeds;
  out.k_a = BitString(p.ell);
  out.k_b = BitString(p.ell);
  out.transcript.c_z = BitString(p.r);
  out.transcript.c_t = BitString(p.t);

  auto [v, x] = reorder(x_raw, seeds.pi);
  auto [w, y] = reorder(y_raw, seeds.pi);
  out.transcript.c_v = v;
  out.pe_errors = hamming_distance(v, w);
  out.flags.f_pe = parameter_estimation(v, w, p.delta);
  detail::emit(trace, "parameter_estimation",
               {{"c_v", v.to_hex()}, {"errors", std::to_string(out.pe_errors)},
                {"f_pe", std::string(to_string(out.flags.f_pe))}});
  if (out.flags.f_pe == Flag::abort) {
    out.flags.f_ec = Flag::abort;
    return out;
  }

  EcResult ec = error_correction(x, y, code, seeds.h_ec);
  out.transcript.c_z = ec.c_z;
  out.transcript.c_t = ec.c_t;
  out.flags.f_ec = ec.flag;
  detail::emit(trace, "error_correction",
               {{"c_z", ec.c_z.to_hex()}, {"c_t", ec.c_t.to_hex()}, {"f_ec", std::string(to_string(ec.flag))}});
  if (ec.flag == Flag::abort) return out;

  auto [k_a, k_b] = privacy_amplification(x, ec.x_hat, seeds.h_pa);
  out.k_a = std::move(k_a);
  out.k_b = std::move(k_b);
  detail::emit(trace, "privacy_amplification", {{"keys_equal", out.k_a == out.k_b ? "true" : "false"}});
  return out;
}

template <CorrelatedSource Source, SyndromeCode Code>
ProtocolOutput run_eb(Source& source, const ProtocolParams& p, const Code& code, RandomStream& rng,
                      const TraceSink& trace = {}) {
  const Seeds seeds = sample_seeds(p, rng);
  detail::emit(trace, "randomization",
               {{"phi", seeds.phi.to_hex()}, {"pi", detail::join_indices(seeds.pi)},
                {"h_ec", seeds.h_ec.bits.to_hex()}, {"h_pa", seeds.h_pa.bits.to_hex()}});
  RawKeyPair raw = source.emit(seeds.phi, rng);
  if (raw.alice.size() != p.m || raw.bob.size() != p.m) throw std::runtime_error("run_eb: source emitted wrong length");
  detail::emit(trace, "measurement", {{"x_raw", raw.alice.to_hex()}, {"y_raw", raw.bob.to_hex()}});
  return eb_postprocess(p, seeds, raw.alice, raw.bob, code, trace);
}

struct SiftResult {
  IndexSet sigma;
  Flag flag = Flag::abort;
};

// The m smallest indices of omega where the bases agree; {0, ..., m-1} and
// abort if there are fewer than m.
inline SiftResult sift(const BitString& phi_a, const BitString& phi_b, const IndexSet& omega, std::size_t m) {
  if (phi_a.size() != phi_b.size()) throw std::invalid_argument("sift: basis length mismatch");
  if (omega.size() > phi_a.size()) throw std::invalid_argument("sift: omega larger than M");
  IndexSet sorted = omega;
  std::sort(sorted.begin(), sorted.end());
  SiftResult out;
  for (std::size_t i : sorted) {
    if (out.sigma.size() == m) break;
    if (phi_a.at(i) == phi_b.at(i)) out.sigma.push_back(i);
  }
  if (out.sigma.size() == m) {
    out.flag = Flag::pass;
  } else {
    out.sigma.resize(m);
    std::iota(out.sigma.begin(), out.sigma.end(), std::size_t{0});
    out.flag = Flag::abort;
  }
  return out;
}

inline IndexSet conclusive_indices(const TernaryString& u) {
  IndexSet omega;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] != Detection::inconclusive) omega.push_back(i);
  }
  return omega;
}

// Order: Phi_A, Phi_B, R, Pi, H_ec, H_pa, then the channel.
template <SyndromeCode Code>
ProtocolOutput run_pm(const ChannelModel& channel, std::size_t M, const ProtocolParams& p, const Code& code,
                      RandomStream& rng, const TraceSink& trace = {}) {
  detail::require_runnable(p);
  channel.validate();
  if (M < p.m) throw std::invalid_argument("run_pm: need M >= m");
  Seeds seeds;
  seeds.phi_a = rng.bits(M);
  seeds.phi_b = rng.bits(M);
  seeds.r_pad = rng.bits(M);
  seeds.pi = sample_subset(p.m, p.k, rng);
  seeds.h_ec = sample_seed(p.n(), p.t, rng);
  seeds.h_pa = sample_seed(p.n(), p.ell, rng);
  detail::emit(trace, "randomization",
               {{"phi_a", seeds.phi_a.to_hex()}, {"phi_b", seeds.phi_b.to_hex()}, {"r", seeds.r_pad.to_hex()},
                {"pi", detail::join_indices(seeds.pi)}, {"h_ec", seeds.h_ec.bits.to_hex()},
                {"h_pa", seeds.h_pa.bits.to_hex()}});

  const TernaryString u = pm_transmit(channel, seeds.r_pad, seeds.phi_a, seeds.phi_b, rng);
  const IndexSet omega = conclusive_indices(u);
  detail::emit(trace, "measurement", {{"conclusive", std::to_string(omega.size())}});

  const SiftResult sifted = sift(seeds.phi_a, seeds.phi_b, omega, p.m);
  detail::emit(trace, "sifting",
               {{"sigma", detail::join_indices(sifted.sigma)}, {"f_si", std::string(to_string(sifted.flag))}});

  if (sifted.flag == Flag::abort) {
    ProtocolOutput out;
    seeds.phi = BitString(p.m);
    out.seeds = std::move(seeds);
    out.k_a = BitString(p.ell);
    out.k_b = BitString(p.ell);
    out.transcript.c_v = BitString(p.k);
    out.transcript.c_z = BitString(p.r);
    out.transcript.c_t = BitString(p.t);
    out.transcript.c_omega = omega;
    out.transcript.c_sigma = sifted.sigma;
    out.transcript.s_phi_b = out.seeds.phi_b;
    out.flags = Flags{Flag::abort, Flag::abort, Flag::abort};
    return out;
  }

  seeds.phi = seeds.phi_a.select(sifted.sigma);
  BitString x_raw = seeds.r_pad.select(sifted.sigma);
  BitString y_raw(p.m);
  for (std::size_t j = 0; j < p.m; ++j) y_raw.set(j, u[sifted.sigma[j]] == Detection::one);

  ProtocolOutput out = eb_postprocess(p, seeds, x_raw, y_raw, code, trace);
  out.transcript.c_omega = omega;
  out.transcript.c_sigma = sifted.sigma;
  out.transcript.s_phi_b = out.seeds.phi_b;
  out.flags.f_si = Flag::pass;
  return out;
}

}  // namespace qkd
