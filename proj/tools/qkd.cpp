#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qkd/channels.hpp"
#include "qkd/ecc.hpp"
#include "qkd/optimizer.hpp"
#include "qkd/parallel.hpp"
#include "qkd/protocol.hpp"
#include "qkd/run_config.hpp"
#include "qkd/serialize.hpp"
#include "qkd/verification.hpp"

namespace {

using nlohmann::json;
using namespace qkd;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit(const std::string& text, const std::string& path) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("invalid list entry '" + item + "'");
    }
    if (used != item.size()) throw UsageError("invalid list entry '" + item + "'");
    if constexpr (std::is_integral_v<T>) {
      if (v < 0 || v != std::floor(v)) throw UsageError("expected a non-negative integer, got '" + item + "'");
      out.push_back(static_cast<T>(std::llround(v)));
    } else {
      out.push_back(static_cast<T>(v));
    }
  }
  return out;
}

std::vector<std::uint64_t> default_m_grid() {
  std::vector<std::uint64_t> out;
  for (int i = 0; i <= 10; ++i) out.push_back(static_cast<std::uint64_t>(std::llround(std::pow(10.0, 3.0 + 0.5 * i))));
  return out;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("malformed JSON in '" + path + "': " + e.what());
  }
}

int cmd_keyrate(const RunConfig& cfg) {
  const RateQuery q = cfg.keyrate->query();
  const RatePoint p = max_key_length(q);
  emit(to_json(p, q.cbar).dump(2) + "\n", cfg.output_path);
  return 0;
}

int cmd_curve(const RunConfig& cfg) {
  const CurveSection& c = *cfg.curve;
  RateQuery tmpl;
  tmpl.eps_target = LogProb::from_linear(c.eps);
  tmpl.cbar = c.cbar;
  tmpl.leakage_factor = c.leakage_factor;
  const auto points = rate_curve(c.m_grid, c.deltas, tmpl, cfg.threads);
  if (cfg.json_output) {
    json arr = json::array();
    for (const auto& p : points) arr.push_back(to_json(p, c.cbar));
    emit(arr.dump(2) + "\n", cfg.output_path);
  } else {
    emit(curve_csv(points, c.cbar), cfg.output_path);
  }
  for (const auto& crossing : half_asymptote_crossings(points, c.cbar)) {
    if (crossing.m) {
      std::fprintf(stderr, "delta=%g: rate reaches half the asymptote at m=%llu\n", crossing.delta,
                   static_cast<unsigned long long>(*crossing.m));
    } else {
      std::fprintf(stderr, "delta=%g: rate stays below half the asymptote on this grid\n", crossing.delta);
    }
  }
  return 0;
}

int cmd_simulate(RunConfig cfg) {
  SimulateSection& s = *cfg.simulate;
  const std::size_t n = s.params.n();
  const std::size_t b = s.block == 0 ? std::min<std::size_t>(n, kMaxCodeLength) : s.block;
  if (b < 2 || b > kMaxCodeLength || b > n) throw UsageError("block length must be in [2, min(n, 32)]");
  const std::size_t blocks = (n + b - 1) / b;
  const std::size_t r_inner = std::max<std::size_t>(1, (s.params.r + blocks - 1) / blocks);
  if (r_inner >= b) throw UsageError("syndrome length too large for the block length");
  RandomStream code_rng = RandomStream::derive(cfg.master_seed, "code", 0);
  const BlockCode code(generate_code(b, r_inner, code_rng), n);
  s.params.r = code.r();
  s.params.validate();
  if (s.params.ell < 1) throw UsageError("ell must be at least 1");
  if (s.params.t > n) throw UsageError("t must not exceed n");

  struct Run {
    ProtocolOutput out;
    std::vector<TraceEvent> trace;
  };
  std::vector<Run> runs(cfg.trials);
  const HonestSource source{s.channel};
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t i) {
    RandomStream rng = RandomStream::derive(cfg.master_seed, "simulate", i);
    TraceSink sink;
    if (s.trace) sink = [&runs, i](const TraceEvent& e) { runs[i].trace.push_back(e); };
    if (s.protocol == "eb") {
      runs[i].out = run_eb(source, s.params, code, rng, sink);
    } else {
      runs[i].out = run_pm(s.channel, s.M, s.params, code, rng, sink);
    }
  });

  std::uint64_t passed = 0, agree = 0, disagree_on_pass = 0, abort_si = 0, abort_pe = 0, abort_ec = 0;
  std::uint64_t pe_runs = 0, conclusive = 0;
  double qber_sum = 0.0;
  for (const auto& run : runs) {
    const auto& o = run.out;
    if (o.flags.f_si == Flag::abort) {
      ++abort_si;
    } else {
      ++pe_runs;
      qber_sum += static_cast<double>(o.pe_errors) / static_cast<double>(s.params.k);
      if (o.flags.f_pe == Flag::abort) {
        ++abort_pe;
      } else if (o.flags.f_ec == Flag::abort) {
        ++abort_ec;
      }
    }
    if (o.flags.all_pass()) {
      ++passed;
      if (o.k_a == o.k_b) {
        ++agree;
      } else {
        ++disagree_on_pass;
      }
    }
    conclusive += o.transcript.c_omega.size();
  }

  const double trials = static_cast<double>(cfg.trials);
  json summary{{"protocol", s.protocol},
               {"seed", cfg.master_seed},
               {"trials", cfg.trials},
               {"params", to_json(s.params)},
               {"channel", to_json(s.channel)},
               {"code", {{"block", b}, {"blocks", code.blocks()}, {"r_block", r_inner}, {"decode_radius", code.inner().decode_radius()}}},
               {"pass", passed},
               {"abort", cfg.trials - passed},
               {"abort_pe", abort_pe},
               {"abort_ec", abort_ec},
               {"key_agreement", agree},
               {"key_disagreement_on_pass", disagree_on_pass},
               {"pass_rate", static_cast<double>(passed) / trials},
               {"key_agreement_rate", static_cast<double>(agree) / trials},
               {"mean_qber", pe_runs ? json(qber_sum / static_cast<double>(pe_runs)) : json(nullptr)}};
  if (s.protocol == "pm") {
    summary["M"] = s.M;
    summary["abort_si"] = abort_si;
    summary["sift_success_rate"] = static_cast<double>(cfg.trials - abort_si) / trials;
    summary["mean_conclusive_fraction"] = static_cast<double>(conclusive) / (trials * static_cast<double>(s.M));
  }
  if (s.trace) {
    json arr = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      json steps = json::array();
      for (const auto& e : runs[i].trace) steps.push_back(to_json(e));
      arr.push_back({{"trial", i}, {"output", to_json(runs[i].out)}, {"trace", steps}});
    }
    summary["runs"] = arr;
  }
  emit(summary.dump(2) + "\n", cfg.output_path);
  return 0;
}

int cmd_verify(const RunConfig& cfg) {
  const std::string& suite = cfg.verify->suite;
  SuiteReport report;
  if (suite == "correctness") {
    CorrectnessOptions opt;
    opt.trials = cfg.trials;
    opt.threads = cfg.threads;
    report = verify_correctness(cfg.master_seed, opt);
  } else if (suite == "serfling") {
    report = verify_serfling(cfg.master_seed);
  } else if (suite == "universality") {
    report = verify_universality();
  } else if (suite == "overlap") {
    report = verify_overlap(cfg.master_seed);
  } else {
    report = verify_reduction();
  }
  if (cfg.json_output) {
    json lines = json::array();
    for (const auto& l : report.lines) {
      lines.push_back({{"check", l.label}, {"empirical", l.empirical}, {"bound", l.bound}, {"pass", l.pass}});
    }
    emit(json{{"suite", report.name}, {"passed", report.passed()}, {"lines", lines}}.dump(2) + "\n",
         cfg.output_path);
  } else {
    emit(report.text(), cfg.output_path);
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-key QKD toolkit: key rates, protocol simulation and verification suites"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::uint64_t threads = 1;
  std::string out_path;
  bool json_output = false;
  app.add_option("--seed", seed, "Master seed for all random streams");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "Output file (default: stdout)");
  app.add_flag("--json", json_output, "Emit JSON instead of text/CSV");
  bool dump_config = false;
  app.add_flag("--dump-config", dump_config, "Print the resolved run configuration and exit");

  RateSection rate;
  rate.eps = 1e-10;
  auto* keyrate = app.add_subcommand("keyrate", "Optimal key length for one block length");
  keyrate->add_option("--m", rate.m, "Block length")->required();
  keyrate->add_option("--delta", rate.delta, "Tolerated error rate, in (0, 0.5)")->required();
  keyrate->add_option("--eps", rate.eps, "Security target");
  keyrate->add_option("--cbar", rate.cbar, "Overlap bound");
  keyrate->add_option("--leakage-factor", rate.leakage_factor, "Error-correction leakage factor");

  std::optional<std::string> m_grid_text;
  std::optional<std::string> deltas_text;
  CurveSection curve;
  auto* curve_cmd = app.add_subcommand("curve", "Key rate against block length for several error thresholds");
  curve_cmd->add_option("--m-grid", m_grid_text, "Comma-separated block lengths");
  curve_cmd->add_option("--deltas", deltas_text, "Comma-separated error thresholds");
  curve_cmd->add_option("--eps", curve.eps, "Security target");
  curve_cmd->add_option("--cbar", curve.cbar, "Overlap bound");
  curve_cmd->add_option("--leakage-factor", curve.leakage_factor, "Error-correction leakage factor");

  SimulateSection sim;
  std::string channel_path;
  std::string variant;
  std::optional<double> qber, eta, attack;
  std::uint64_t sim_m = 64;
  std::optional<std::uint64_t> sim_k, sim_r, sim_ell, sim_M;
  std::uint64_t sim_t = 8;
  double sim_delta = 0.1;
  double sim_cbar = 0.5;
  std::uint64_t trials = 0;
  auto* simulate = app.add_subcommand("simulate", "Run the protocol repeatedly and summarize the outcomes");
  simulate->add_option("--protocol", sim.protocol, "eb or pm")->check(CLI::IsMember({"eb", "pm"}));
  simulate->add_option("--channel-config", channel_path, "Channel model file (JSON)");
  simulate->add_option("--variant", variant, "eb_honest, pm_honest or pm_intercept_resend");
  simulate->add_option("--qber", qber, "Bit-flip probability on matched bases");
  simulate->add_option("--eta", eta, "Transmittance");
  simulate->add_option("--attack-fraction", attack, "Fraction of intercepted rounds");
  simulate->add_option("--m", sim_m, "Sifted block length");
  simulate->add_option("--k", sim_k, "Parameter-estimation sample size (default m/4)");
  simulate->add_option("--delta", sim_delta, "Tolerated error rate");
  simulate->add_option("--r", sim_r, "Syndrome bits (default 1.1 n h(delta))");
  simulate->add_option("--t", sim_t, "Verification hash bits");
  simulate->add_option("--ell", sim_ell, "Final key bits (default n - r - t)");
  simulate->add_option("--cbar", sim_cbar, "Overlap bound");
  simulate->add_option("--M", sim_M, "Rounds for pm (default 4m/eta)");
  simulate->add_option("--block", sim.block, "Error-correction block length (default min(n, 32))");
  simulate->add_option("--trials", trials, "Number of runs");
  simulate->add_flag("--trace", sim.trace, "Include per-step traces of every run");

  VerifySection ver;
  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("--suite", ver.suite, "correctness, serfling, universality, overlap or reduction")
      ->required()
      ->check(CLI::IsMember(kSuites));
  verify->add_option("--trials", trials, "Monte Carlo trials (correctness suite)");

  std::string replay_path;
  auto* replay = app.add_subcommand("replay", "Execute a run configuration written by --dump-config");
  replay->add_option("config", replay_path, "Run configuration file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    RunConfig cfg;
    cfg.master_seed = seed;
    cfg.threads = threads;
    cfg.output_path = out_path;
    cfg.json_output = json_output;

    if (replay->parsed()) {
      cfg = run_config_from_json(load_json_file(replay_path));
    } else if (keyrate->parsed()) {
      cfg.command = "keyrate";
      if (!(rate.delta > 0.0 && rate.delta < 0.5)) throw UsageError("--delta must lie in (0, 0.5)");
      if (!(rate.eps > 0.0 && rate.eps < 1.0)) throw UsageError("--eps must lie in (0, 1)");
      cfg.keyrate = rate;
    } else if (curve_cmd->parsed()) {
      cfg.command = "curve";
      curve.m_grid = m_grid_text ? parse_list<std::uint64_t>(*m_grid_text) : default_m_grid();
      curve.deltas = deltas_text ? parse_list<double>(*deltas_text) : std::vector<double>{0.01, 0.025, 0.05, 0.075};
      cfg.curve = curve;
    } else if (simulate->parsed()) {
      cfg.command = "simulate";
      if (!channel_path.empty()) {
        sim.channel = channel_from_json(load_json_file(channel_path));
      } else {
        sim.channel.variant = parse_channel_variant(
            variant.empty() ? (sim.protocol == "pm" ? "pm_honest" : "eb_honest") : variant);
      }
      if (qber) sim.channel.qber = *qber;
      if (eta) sim.channel.eta = *eta;
      if (attack) sim.channel.attack_fraction = *attack;
      sim.channel.validate();
      ProtocolParams& p = sim.params;
      p.m = sim_m;
      p.k = sim_k ? *sim_k : std::max<std::uint64_t>(1, sim_m / 4);
      p.delta = sim_delta;
      p.cbar = sim_cbar;
      p.t = sim_t;
      if (p.k >= p.m) throw UsageError("--k must be below --m");
      p.r = sim_r ? *sim_r : leakage_bits(p.n(), p.delta, 1.1);
      if (p.r + p.t >= p.n() && !sim_ell) throw UsageError("n is too small for the default key length");
      p.ell = sim_ell ? *sim_ell : p.n() - p.r - p.t;
      sim.M = sim_M ? *sim_M : static_cast<std::uint64_t>(std::ceil(4.0 * static_cast<double>(p.m) / sim.channel.eta));
      if (sim.protocol == "eb") sim.M = 0;
      cfg.trials = trials ? trials : 1000;
      cfg.simulate = sim;
    } else if (verify->parsed()) {
      cfg.command = "verify";
      cfg.trials = trials ? trials : 100000;
      cfg.verify = ver;
    }
    cfg.validate();

    if (dump_config) {
      emit(to_json(cfg).dump(2) + "\n", "");
      return 0;
    }
    if (cfg.command == "keyrate") return cmd_keyrate(cfg);
    if (cfg.command == "curve") return cmd_curve(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    return cmd_verify(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
