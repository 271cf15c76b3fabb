#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qkd/bits.hpp"
#include "qkd/qtoolbox.hpp"
#include "qkd/random.hpp"

namespace qkd {

enum class ChannelVariant { eb_honest, pm_honest, pm_intercept_resend };

inline std::string_view to_string(ChannelVariant v) {
  switch (v) {
    case ChannelVariant::eb_honest: return "eb_honest";
    case ChannelVariant::pm_honest: return "pm_honest";
    case ChannelVariant::pm_intercept_resend: return "pm_intercept_resend";
  }
  throw std::invalid_argument("ChannelVariant: unknown value");
}

inline ChannelVariant parse_channel_variant(std::string_view text) {
  if (text == "eb_honest") return ChannelVariant::eb_honest;
  if (text == "pm_honest") return ChannelVariant::pm_honest;
  if (text == "pm_intercept_resend") return ChannelVariant::pm_intercept_resend;
  throw std::invalid_argument("ChannelVariant: unknown variant '" + std::string(text) + "'");
}

struct ChannelModel {
  ChannelVariant variant = ChannelVariant::eb_honest;
  double qber = 0.0;
  double eta = 1.0;
  double attack_fraction = 0.0;

  void validate() const {
    if (!(qber >= 0.0 && qber <= 0.5)) throw std::invalid_argument("ChannelModel: qber outside [0, 1/2]");
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("ChannelModel: eta outside (0, 1]");
    if (!(attack_fraction >= 0.0 && attack_fraction <= 1.0)) {
      throw std::invalid_argument("ChannelModel: attack_fraction outside [0, 1]");
    }
    if (variant == ChannelVariant::eb_honest && eta != 1.0) {
      throw std::invalid_argument("ChannelModel: eb_honest requires eta = 1");
    }
    if (variant != ChannelVariant::pm_intercept_resend && attack_fraction != 0.0) {
      throw std::invalid_argument("ChannelModel: attack_fraction is only meaningful for pm_intercept_resend");
    }
  }

  friend bool operator==(const ChannelModel&, const ChannelModel&) = default;
};

struct RawKeyPair {
  BitString alice;
  BitString bob;
};

inline RawKeyPair eb_emit(const ChannelModel& model, const BitString& phi, RandomStream& rng) {
  if (model.variant != ChannelVariant::eb_honest) throw std::invalid_argument("eb_emit: requires eb_honest");
  RawKeyPair out{BitString(phi.size()), BitString(phi.size())};
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const bool a = rng.bit();
    out.alice.set(i, a);
    out.bob.set(i, a != rng.bernoulli(model.qber));
  }
  return out;
}

// A source of m correlated outcome pairs for a given basis string.
template <class S>
concept CorrelatedSource = requires(S& s, const BitString& phi, RandomStream& rng) {
  { s.emit(phi, rng) } -> std::same_as<RawKeyPair>;
};

struct HonestSource {
  ChannelModel model;
  RawKeyPair emit(const BitString& phi, RandomStream& rng) const { return eb_emit(model, phi, rng); }
};

enum class Detection : std::uint8_t { zero = 0, one = 1, inconclusive = 2 };

using TernaryString = std::vector<Detection>;

inline Detection detection_of(bool bit) { return bit ? Detection::one : Detection::zero; }

inline void require_pm(const ChannelModel& model, const char* what) {
  if (model.variant == ChannelVariant::eb_honest) throw std::invalid_argument(std::string(what) + ": requires a PM variant");
}

// Bob's outcome for one round. Loss is decided first and independently of
// everything else; Eve then intercepts with probability attack_fraction.
inline Detection pm_transmit_round(const ChannelModel& model, bool r, bool phi_a, bool phi_b, RandomStream& rng) {
  if (!rng.bernoulli(model.eta)) return Detection::inconclusive;
  bool outcome;
  if (model.variant == ChannelVariant::pm_intercept_resend && rng.bernoulli(model.attack_fraction)) {
    const bool eve_basis = rng.bit();
    const bool eve_bit = eve_basis == phi_a ? r : rng.bit();
    outcome = eve_basis == phi_b ? eve_bit : rng.bit();
  } else {
    outcome = phi_a == phi_b ? r : rng.bit();
  }
  if (phi_a == phi_b && rng.bernoulli(model.qber)) outcome = !outcome;
  return detection_of(outcome);
}

inline TernaryString pm_transmit(const ChannelModel& model, const BitString& r, const BitString& phi_a,
                                 const BitString& phi_b, RandomStream& rng) {
  require_pm(model, "pm_transmit");
  if (phi_a.size() != r.size() || phi_b.size() != r.size()) throw std::invalid_argument("pm_transmit: length mismatch");
  TernaryString u(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) u[i] = pm_transmit_round(model, r[i], phi_a[i], phi_b[i], rng);
  return u;
}

// Exact distribution of one round's outcome, indexed by Detection.
inline std::array<double, 3> pm_outcome_probabilities(const ChannelModel& model, bool r, bool phi_a, bool phi_b) {
  require_pm(model, "pm_outcome_probabilities");
  const double a = model.variant == ChannelVariant::pm_intercept_resend ? model.attack_fraction : 0.0;
  // Probability that the pre-noise outcome equals r.
  double p_r = 0.0;
  {
    const double honest = phi_a == phi_b ? 1.0 : 0.5;
    double attacked = 0.0;
    for (int eve_basis = 0; eve_basis < 2; ++eve_basis) {
      const double eve_correct = (eve_basis == phi_a) ? 1.0 : 0.5;
      attacked += 0.5 * (eve_basis == phi_b ? eve_correct : 0.5);
    }
    p_r = (1.0 - a) * honest + a * attacked;
  }
  if (phi_a == phi_b) p_r = p_r * (1.0 - model.qber) + (1.0 - p_r) * model.qber;
  std::array<double, 3> out{};
  out[static_cast<int>(detection_of(r))] = model.eta * p_r;
  out[static_cast<int>(detection_of(!r))] = model.eta * (1.0 - p_r);
  out[static_cast<int>(Detection::inconclusive)] = 1.0 - model.eta;
  return out;
}

// Qubit BB84 states mixed with identity/2: (1 - p) rho + p 1/2.
inline PreparedStateFamily depolarized_bb84(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("depolarized_bb84: p outside [0, 1]");
  const auto ideal = PreparedStateFamily::bb84();
  std::vector<std::vector<DensityMatrix>> states(2);
  for (std::size_t phi = 0; phi < 2; ++phi) {
    for (std::size_t x = 0; x < 2; ++x) {
      const CMatrix m = (1.0 - p) * ideal.state(phi, x).matrix() + p * 0.5 * CMatrix::Identity(2, 2);
      states[phi].emplace_back(m);
    }
  }
  return PreparedStateFamily(std::move(states), {{0.5, 0.5}, {0.5, 0.5}});
}

// Projective BB84 measurements {computational, Hadamard}.
inline std::vector<MeasurementSet> bb84_measurements() {
  const double s = 1.0 / std::sqrt(2.0);
  CMatrix hadamard(2, 2);
  hadamard << s, s, s, -s;
  return {MeasurementSet::projective(CMatrix::Identity(2, 2)), MeasurementSet::projective(hadamard)};
}

struct BornSample {
  std::uint8_t phi_a = 0;
  std::uint8_t x = 0;
  std::uint8_t phi_b = 0;
  std::uint8_t outcome = 0;
};

inline constexpr std::size_t kBornMaxRounds = 10000;
inline constexpr std::size_t kBornMaxDimension = 4;

// Per round: uniform preparation basis, x ~ p^phi, uniform measurement basis,
// outcome drawn with probability tr{M^dagger M rho}.
inline std::vector<BornSample> born_oracle(const PreparedStateFamily& states,
                                           const std::vector<MeasurementSet>& measurement, std::size_t rounds,
                                           RandomStream& rng) {
  if (rounds > kBornMaxRounds) throw std::invalid_argument("born_oracle: at most 10^4 rounds");
  if (states.dim() > kBornMaxDimension) throw std::invalid_argument("born_oracle: dimension exceeds 4");
  if (measurement.size() != states.num_bases()) throw std::invalid_argument("born_oracle: one measurement per basis");
  for (const auto& mset : measurement) {
    if (mset.dim() != states.dim()) throw std::invalid_argument("born_oracle: dimension mismatch");
  }
  auto draw = [&](const std::vector<double>& probs) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;
  };
  std::vector<BornSample> out;
  out.reserve(rounds);
  for (std::size_t i = 0; i < rounds; ++i) {
    BornSample s;
    s.phi_a = static_cast<std::uint8_t>(rng.below(states.num_bases()));
    std::vector<double> px(states.num_values(s.phi_a));
    for (std::size_t x = 0; x < px.size(); ++x) px[x] = states.probability(s.phi_a, x);
    s.x = static_cast<std::uint8_t>(draw(px));
    s.phi_b = static_cast<std::uint8_t>(rng.below(measurement.size()));
    s.outcome = static_cast<std::uint8_t>(draw(measurement[s.phi_b].probabilities(states.state(s.phi_a, s.x))));
    out.push_back(s);
  }
  return out;
}

}  // namespace qkd
