#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qkd/serialize.hpp"

namespace qkd {

inline const std::vector<std::string> kSuites = {"correctness", "serfling", "universality", "overlap", "reduction"};

struct RateSection {
  std::uint64_t m = 0;
  double delta = 0.0;
  double eps = 1e-10;
  double cbar = 0.5;
  double leakage_factor = 1.1;

  RateQuery query() const {
    RateQuery q;
    q.m = m;
    q.delta = delta;
    q.eps_target = LogProb::from_linear(eps);
    q.cbar = cbar;
    q.leakage_factor = leakage_factor;
    return q;
  }
  friend bool operator==(const RateSection&, const RateSection&) = default;
};

struct CurveSection {
  std::vector<std::uint64_t> m_grid;
  std::vector<double> deltas;
  double eps = 1e-10;
  double cbar = 0.5;
  double leakage_factor = 1.1;
  friend bool operator==(const CurveSection&, const CurveSection&) = default;
};

struct SimulateSection {
  std::string protocol = "eb";
  ChannelModel channel;
  ProtocolParams params;
  std::uint64_t M = 0;
  std::uint64_t block = 0;
  bool trace = false;
  friend bool operator==(const SimulateSection&, const SimulateSection&) = default;
};

struct VerifySection {
  std::string suite;
  friend bool operator==(const VerifySection&, const VerifySection&) = default;
};

struct RunConfig {
  std::string command;
  std::uint64_t master_seed = 1;
  std::uint64_t threads = 1;
  std::uint64_t trials = 1;
  std::string output_path;
  bool json_output = false;
  std::optional<RateSection> keyrate;
  std::optional<CurveSection> curve;
  std::optional<SimulateSection> simulate;
  std::optional<VerifySection> verify;

  void validate() const {
    if (threads < 1) throw std::invalid_argument("RunConfig: threads must be at least 1");
    if (trials < 1) throw std::invalid_argument("RunConfig: trials must be at least 1");
    const bool has_section = (command == "keyrate" && keyrate) || (command == "curve" && curve) ||
                             (command == "simulate" && simulate) || (command == "verify" && verify);
    if (!has_section) throw std::invalid_argument("RunConfig: command '" + command + "' has no matching section");
    if (keyrate) keyrate->query().validate();
    if (curve) {
      if (!(curve->eps > 0.0 && curve->eps < 1.0)) throw std::invalid_argument("RunConfig: eps outside (0, 1)");
      for (double d : curve->deltas) {
        RateQuery q{4, d, LogProb::from_linear(curve->eps), curve->cbar, curve->leakage_factor};
        q.validate();
      }
      for (auto m : curve->m_grid) {
        if (m < 4) throw std::invalid_argument("RunConfig: grid values of m must be at least 4");
      }
    }
    if (simulate) {
      if (simulate->protocol != "eb" && simulate->protocol != "pm") {
        throw std::invalid_argument("RunConfig: protocol must be eb or pm");
      }
      simulate->channel.validate();
      simulate->params.validate();
      const bool pm_channel = simulate->channel.variant != ChannelVariant::eb_honest;
      if (pm_channel != (simulate->protocol == "pm")) {
        throw std::invalid_argument("RunConfig: channel variant does not match protocol");
      }
      if (simulate->protocol == "pm" && simulate->M < simulate->params.m) {
        throw std::invalid_argument("RunConfig: need M >= m");
      }
    }
    if (verify && std::find(kSuites.begin(), kSuites.end(), verify->suite) == kSuites.end()) {
      throw std::invalid_argument("RunConfig: unknown suite '" + verify->suite + "'");
    }
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"command", c.command},
                   {"master_seed", c.master_seed},
                   {"threads", c.threads},
                   {"trials", c.trials},
                   {"output_path", c.output_path},
                   {"json", c.json_output}};
  if (c.keyrate) {
    j["keyrate"] = {{"m", c.keyrate->m},
                    {"delta", c.keyrate->delta},
                    {"eps", c.keyrate->eps},
                    {"cbar", c.keyrate->cbar},
                    {"leakage_factor", c.keyrate->leakage_factor}};
  }
  if (c.curve) {
    j["curve"] = {{"m_grid", c.curve->m_grid},
                  {"deltas", c.curve->deltas},
                  {"eps", c.curve->eps},
                  {"cbar", c.curve->cbar},
                  {"leakage_factor", c.curve->leakage_factor}};
  }
  if (c.simulate) {
    j["simulate"] = {{"protocol", c.simulate->protocol},
                     {"channel", to_json(c.simulate->channel)},
                     {"params", to_json(c.simulate->params)},
                     {"M", c.simulate->M},
                     {"block", c.simulate->block},
                     {"trace", c.simulate->trace}};
  }
  if (c.verify) j["verify"] = {{"suite", c.verify->suite}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.command = j.value("command", std::string{});
  c.master_seed = j.value("master_seed", std::uint64_t{1});
  c.threads = j.value("threads", std::uint64_t{1});
  c.trials = j.value("trials", std::uint64_t{1});
  c.output_path = j.value("output_path", std::string{});
  c.json_output = j.value("json", false);
  if (j.contains("keyrate")) {
    const auto& s = j.at("keyrate");
    c.keyrate = RateSection{s.at("m").get<std::uint64_t>(), s.at("delta").get<double>(), s.value("eps", 1e-10),
                            s.value("cbar", 0.5), s.value("leakage_factor", 1.1)};
  }
  if (j.contains("curve")) {
    const auto& s = j.at("curve");
    c.curve = CurveSection{s.at("m_grid").get<std::vector<std::uint64_t>>(), s.at("deltas").get<std::vector<double>>(),
                           s.value("eps", 1e-10), s.value("cbar", 0.5), s.value("leakage_factor", 1.1)};
  }
  if (j.contains("simulate")) {
    const auto& s = j.at("simulate");
    c.simulate = SimulateSection{s.value("protocol", std::string{"eb"}),
                                 channel_from_json(s.at("channel")),
                                 params_from_json(s.at("params")),
                                 s.value("M", std::uint64_t{0}),
                                 s.value("block", std::uint64_t{0}),
                                 s.value("trace", false)};
  }
  if (j.contains("verify")) c.verify = VerifySection{j.at("verify").at("suite").get<std::string>()};
  c.validate();
  return c;
}

}  // namespace qkd
