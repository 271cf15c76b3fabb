#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkd/channels.hpp"
#include "qkd/ecc.hpp"
#include "qkd/optimizer.hpp"
#include "qkd/protocol.hpp"
#include "qkd/qtoolbox.hpp"
#include "qkd/security.hpp"

namespace qkd {

using nlohmann::json;

// Decimal scientific notation for values far below the double range, e.g. "1.25e-300".
inline std::string format_scientific(LogProb p) {
  if (p.is_zero()) return "0";
  const double l10 = p.log10();
  double exponent = std::floor(l10);
  double mantissa = std::pow(10.0, l10 - exponent);
  if (mantissa >= 9.9995) {
    mantissa /= 10.0;
    exponent += 1.0;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3fe%+.0f", mantissa, exponent);
  return buf;
}

inline json log2_or_null(LogProb p) { return p.is_zero() ? json(nullptr) : json(p.log2()); }

inline json to_json(const EpsilonBreakdown& e) {
  return json{{"nu", e.nu},
              {"vacuous", e.vacuous()},
              {"log2",
               {{"eps_ec", log2_or_null(e.eps_ec)},
                {"eps_pe", log2_or_null(e.eps_pe)},
                {"eps_pa", log2_or_null(e.eps_pa)},
                {"eps_secrecy", log2_or_null(e.eps_secrecy)},
                {"eps_total", log2_or_null(e.eps_total)}}},
              {"decimal",
               {{"eps_ec", format_scientific(e.eps_ec)},
                {"eps_pe", format_scientific(e.eps_pe)},
                {"eps_pa", format_scientific(e.eps_pa)},
                {"eps_secrecy", format_scientific(e.eps_secrecy)},
                {"eps_total", format_scientific(e.eps_total)}}}};
}

inline json to_json(const RatePoint& p, double cbar) {
  json j{{"m", p.m},
         {"delta", p.delta},
         {"ell", p.ell},
         {"rate", p.rate},
         {"infeasible", p.infeasible},
         {"asymptote", asymptotic_rate(p.delta, cbar)}};
  if (p.infeasible) {
    j["k"] = nullptr;
    j["t"] = nullptr;
    j["r"] = nullptr;
    j["nu"] = nullptr;
    j["log2_eps_total"] = nullptr;
    j["eps"] = nullptr;
  } else {
    j["k"] = p.k_star;
    j["t"] = p.t_star;
    j["r"] = p.r;
    j["nu"] = p.nu_star;
    j["log2_eps_total"] = p.eps.eps_total.log2();
    j["eps"] = to_json(p.eps);
  }
  return j;
}

inline json to_json(const ProtocolParams& p) {
  return json{{"m", p.m}, {"k", p.k}, {"delta", p.delta}, {"r", p.r}, {"t", p.t}, {"ell", p.ell}, {"cbar", p.cbar}};
}

inline ProtocolParams params_from_json(const json& j) {
  ProtocolParams p;
  p.m = j.at("m").get<std::uint64_t>();
  p.k = j.at("k").get<std::uint64_t>();
  p.delta = j.at("delta").get<double>();
  p.r = j.at("r").get<std::uint64_t>();
  p.t = j.at("t").get<std::uint64_t>();
  p.ell = j.at("ell").get<std::uint64_t>();
  p.cbar = j.value("cbar", 0.5);
  p.validate();
  return p;
}

inline json to_json(const ChannelModel& c) {
  return json{{"variant", std::string(to_string(c.variant))},
              {"qber", c.qber},
              {"eta", c.eta},
              {"attack_fraction", c.attack_fraction}};
}

inline ChannelModel channel_from_json(const json& j) {
  ChannelModel c;
  c.variant = parse_channel_variant(j.at("variant").get<std::string>());
  c.qber = j.value("qber", 0.0);
  c.eta = j.value("eta", 1.0);
  c.attack_fraction = j.value("attack_fraction", 0.0);
  c.validate();
  return c;
}

inline json to_json(const ToeplitzSeed& s) {
  return json{{"n", s.n}, {"ell", s.ell}, {"bits", s.bits.to_hex()}};
}

inline ToeplitzSeed seed_from_json(const json& j) {
  const auto n = j.at("n").get<std::size_t>();
  const auto ell = j.at("ell").get<std::size_t>();
  return ToeplitzSeed(n, ell, BitString::from_hex(j.at("bits").get<std::string>(), n + ell - 1));
}

inline json to_json(const ProtocolOutput& o) {
  json seeds{{"phi", o.seeds.phi.to_hex()},
             {"pi", o.seeds.pi},
             {"h_ec", to_json(o.seeds.h_ec)},
             {"h_pa", to_json(o.seeds.h_pa)}};
  json transcript{{"c_v", o.transcript.c_v.to_hex()},
                  {"c_z", o.transcript.c_z.to_hex()},
                  {"c_t", o.transcript.c_t.to_hex()}};
  json flags{{"f_si", std::string(to_string(o.flags.f_si))},
             {"f_pe", std::string(to_string(o.flags.f_pe))},
             {"f_ec", std::string(to_string(o.flags.f_ec))}};
  if (o.flags.f_si != Flag::absent) {
    seeds["phi_a"] = o.seeds.phi_a.to_hex();
    seeds["phi_b"] = o.seeds.phi_b.to_hex();
    seeds["r"] = o.seeds.r_pad.to_hex();
    transcript["c_omega"] = o.transcript.c_omega;
    transcript["c_sigma"] = o.transcript.c_sigma;
    transcript["s_phi_b"] = o.transcript.s_phi_b.to_hex();
  }
  return json{{"k_a", o.k_a.to_hex()}, {"k_b", o.k_b.to_hex()}, {"seeds", seeds},
              {"transcript", transcript}, {"flags", flags}};
}

inline json to_json(const TraceEvent& e) {
  json j{{"step", e.step}};
  for (const auto& [key, value] : e.fields) j[key] = value;
  return j;
}

// Row-major [re, im] pairs.
inline json to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

inline CMatrix matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw std::invalid_argument("matrix_from_json: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& entry = row.at(static_cast<std::size_t>(c));
      m(i, c) = Complex(entry.at(0).get<double>(), entry.at(1).get<double>());
    }
  }
  return m;
}

// Parity matrix as row-wise hex.
inline json to_json(const LinearCode& code) {
  json rows = json::array();
  for (const auto& row : code.parity()) rows.push_back(row.to_hex());
  return json{{"n", code.n()}, {"r", code.r()}, {"decode_radius", code.decode_radius()}, {"parity", rows}};
}

inline LinearCode code_from_json(const json& j) {
  const auto n = j.at("n").get<std::size_t>();
  std::vector<BitString> rows;
  for (const auto& row : j.at("parity")) rows.push_back(BitString::from_hex(row.get<std::string>(), n));
  return LinearCode::from_parity(rows);
}

}  // namespace qkd
