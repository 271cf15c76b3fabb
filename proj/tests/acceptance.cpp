// Acceptance run: one [PASS]/[FAIL] line per criterion, followed by detail lines.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qkd/channels.hpp"
#include "qkd/optimizer.hpp"
#include "qkd/protocol.hpp"
#include "qkd/qtoolbox.hpp"
#include "qkd/verification.hpp"
#include "support.hpp"

using namespace qkd;

namespace {

constexpr std::uint64_t kMaster = 20240601;
const std::vector<double> kDeltas = {0.01, 0.025, 0.05, 0.075};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void verdict(int id, bool pass, const std::string& text) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, text.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void detail(const std::string& text) {
  std::printf("    %s\n", text.c_str());
}

void detail_report(const SuiteReport& report, bool failures_only) {
  for (const auto& line : report.lines) {
    if (failures_only && line.pass) continue;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%s%s: empirical=%.6g bound=%.6g", line.pass ? "" : "FAILED ", line.label.c_str(),
                  line.empirical, line.bound);
    detail(buf);
  }
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

void criterion1() {
  bool pass = true;
  double worst_gap = 0.0;
  double slowest = 0.0;
  for (double delta : kDeltas) {
    RateQuery q;
    q.m = 1'000'000'000;
    q.delta = delta;
    q.leakage_factor = 1.0;
    const auto start = Clock::now();
    const RatePoint p = max_key_length(q);
    const double secs = seconds_since(start);
    const double asym = asymptotic_rate(delta, 0.5);
    const double gap = (asym - p.rate) / asym;
    worst_gap = std::max(worst_gap, std::abs(gap));
    slowest = std::max(slowest, secs);
    pass = pass && !p.infeasible && std::abs(gap) <= 0.05 && secs < 60.0;
    char buf[256];
    std::snprintf(buf, sizeof buf, "delta=%.3f rate=%.6f asymptote=%.6f relative gap=%.4f (%.2fs)", delta, p.rate, asym,
                  gap, secs);
    detail(buf);
  }
  verdict(1, pass,
          fmt("rate at m=1e9 within 5%% of 1-2h(delta): worst relative gap %.4f, slowest point %.2fs", worst_gap,
              slowest));
}

std::vector<RatePoint> criterion2() {
  const std::vector<std::uint64_t> ms = {1000, 10000, 100000, 1000000, 10000000, 100000000};
  const auto start = Clock::now();
  const auto points = rate_curve(ms, kDeltas, RateQuery{});
  const double secs = seconds_since(start);

  bool monotone_m = true;
  bool monotone_delta = true;
  for (std::size_t d = 0; d < kDeltas.size(); ++d) {
    for (std::size_t i = 1; i < ms.size(); ++i) {
      if (points[d * ms.size() + i].rate < points[d * ms.size() + i - 1].rate) monotone_m = false;
    }
  }
  for (std::size_t d = 1; d < kDeltas.size(); ++d) {
    for (std::size_t i = 0; i < ms.size(); ++i) {
      if (points[d * ms.size() + i].rate > points[(d - 1) * ms.size() + i].rate) monotone_delta = false;
    }
  }
  const double rate_1e5 = points[2].rate;
  const std::string csv = curve_csv(points, 0.5);
  std::ofstream("rate_curve.csv") << csv;
  bool columns = csv.rfind(std::string(kCurveHeader) + "\n", 0) == 0;
  std::size_t rows = 0;
  for (char ch : csv) rows += ch == '\n';
  columns = columns && rows == 1 + points.size();

  for (std::size_t d = 0; d < kDeltas.size(); ++d) {
    std::string row = fmt("delta=%.3f asymptote=%.6f rates:", kDeltas[d], asymptotic_rate(kDeltas[d], 0.5));
    for (std::size_t i = 0; i < ms.size(); ++i) row += fmt(" %.6f", points[d * ms.size() + i].rate);
    detail(row);
  }
  detail("curve written to rate_curve.csv");
  const bool pass = monotone_m && monotone_delta && rate_1e5 > 0.0 && columns && secs < 600.0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "curves over m=1e3..1e8: nondecreasing in m %s, nonincreasing in delta %s, rate(1e5, 0.01)=%.6f, "
                "%zu CSV rows with asymptote column, %.1fs",
                monotone_m ? "yes" : "no", monotone_delta ? "yes" : "no", rate_1e5, rows - 1, secs);
  verdict(2, pass, buf);
  return points;
}

void criterion3() {
  const auto start = Clock::now();
  const auto report = verify_correctness(kMaster, CorrectnessOptions{100000, 8, 1});
  const double secs = seconds_since(start);
  detail_report(report, false);
  verdict(3, report.passed() && secs < 60.0,
          fmt("undetected verification failures over 1e5 hash seeds at t=8 within 2^-8 + 3 sigma (%.1fs)", secs));
}

void criterion4() {
  const auto start = Clock::now();
  const auto report = verify_universality(6, 3);
  const double secs = seconds_since(start);
  detail_report(report, true);
  double pairs = 0.0;
  for (const auto& l : report.lines) pairs += l.bound;
  verdict(4, report.passed() && secs < 60.0,
          fmt("Toeplitz collision probability exactly 2^-ell for all %.0f pairs with n<=6, ell<=3 (%.2fs)", pairs,
              secs));
}

void criterion5() {
  const auto start = Clock::now();
  const auto report = verify_serfling(kMaster);
  const double secs = seconds_since(start);
  detail_report(report, true);
  double worst = 0.0;
  for (const auto& l : report.lines) {
    if (l.bound > 0.0 && l.bound < 1.0) worst = std::max(worst, l.empirical / l.bound);
  }
  verdict(5, report.passed() && secs < 300.0,
          fmt("sampling tail never exceeds the bound over %.0f checks (max frequency/bound %.4f, %.1fs)",
              static_cast<double>(report.lines.size()), worst, secs));
}

void criterion6() {
  const auto report = verify_overlap(kMaster);
  detail_report(report, false);
  verdict(6, report.passed(), "c = c' = 1/2 for BB84 and cbar_bound equal to brute force on lists up to length 12");
}

void criterion7() {
  RandomStream rng = RandomStream::derive(kMaster, "virtual-measurement", 0);
  double worst_residual = 0.0;
  double worst_overlap = 0.0;
  std::vector<PreparedStateFamily> families = {PreparedStateFamily::bb84()};
  for (int i = 0; i < 100; ++i) families.push_back(testing::random_blind_family(2, 2, rng));
  for (const auto& family : families) {
    const auto vm = virtual_measurement(family);
    for (std::size_t phi = 0; phi < 2; ++phi) {
      for (std::size_t x = 0; x < family.num_values(phi); ++x) {
        const CMatrix expect = family.probability(phi, x) * family.state(phi, x).matrix();
        worst_residual = std::max(worst_residual, testing::max_abs(reconstructed_state(vm, phi, x) - expect));
      }
    }
    worst_overlap =
        std::max(worst_overlap, std::abs(overlap_c(vm.measurements[0], vm.measurements[1]) - overlap_cprime(family)));
  }
  verdict(7, worst_residual <= 1e-10 && worst_overlap <= 1e-9,
          fmt("virtual measurement on BB84 + 100 random blind qubit families: max residual %.3g, max |c - c'| %.3g",
              worst_residual, worst_overlap));
}

void criterion8() {
  RandomStream rng = RandomStream::derive(kMaster, "smoothing", 0);
  double worst_distance = 0.0;
  double worst_fidelity = 0.0;
  int cases = 0;
  for (double t : {0.2, 0.5, 0.75, 0.9, 0.99, 1.0}) {
    for (double frac : {0.0, 1e-6, 0.01, 0.1, 0.25, 0.5, 0.9}) {
      const double eps = frac * t;
      EventBlockState in;
      in.blocks.push_back(eps > 0 ? testing::random_state(2, rng, eps).matrix() : CMatrix::Zero(2, 2));
      in.in_event.push_back(true);
      in.blocks.push_back(testing::random_state(3, rng, 0.6 * (t - eps)).matrix());
      in.in_event.push_back(false);
      in.blocks.push_back(testing::random_state(2, rng, 0.4 * (t - eps)).matrix());
      in.in_event.push_back(false);
      const auto out = smooth_away_event(in);
      worst_distance = std::max(worst_distance, std::abs(out.achieved_distance - std::sqrt(eps)));
      const double f = generalized_fidelity(in.block_diagonal(), out.state.block_diagonal());
      worst_fidelity = std::max(worst_fidelity, std::abs(f - (1.0 - eps)));
      ++cases;
    }
  }
  verdict(8, worst_distance <= 1e-10 && worst_fidelity <= 1e-10,
          fmt("smoothing over %.0f (t, eps) cases: max |distance - sqrt(eps)| %.3g, generalized fidelity off by %.3g",
              cases, worst_distance, worst_fidelity));
}

void criterion9() {
  constexpr std::size_t kRounds = 100000;
  const ChannelModel attack{ChannelVariant::pm_intercept_resend, 0.0, 1.0, 1.0};
  RandomStream rng = RandomStream::derive(kMaster, "intercept-qber", 0);
  const BitString r = rng.bits(kRounds);
  const BitString phi = rng.bits(kRounds);
  const TernaryString u = pm_transmit(attack, r, phi, phi, rng);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < kRounds; ++i) errors += u[i] != detection_of(r[i]);
  const double qber = static_cast<double>(errors) / kRounds;

  RandomStream code_rng = RandomStream::derive(kMaster, "intercept-code", 0);
  const BlockCode code(generate_code(16, 8, code_rng), 100);
  const ProtocolParams p{300, 200, 0.1, code.r(), 8, 4, 0.5};
  int aborts = 0;
  constexpr int kRuns = 1000;
  for (int i = 0; i < kRuns; ++i) {
    RandomStream run = RandomStream::derive(kMaster, "intercept-run", static_cast<std::uint64_t>(i));
    aborts += run_pm(attack, 4 * p.m, p, code, run).flags.f_pe == Flag::abort;
  }
  const double freq = static_cast<double>(aborts) / kRuns;
  verdict(9, std::abs(qber - 0.25) <= 0.01 && freq >= 0.999,
          fmt("intercept-resend matched-basis QBER %.4f over 1e5 rounds; abort frequency %.3f over 1e3 runs (k=200)",
              qber, freq));
}

void criterion10() {
  const auto start = Clock::now();
  const auto result = exact_reduction(ReductionOptions{6, 3, 1, 0.1});
  const auto report = verify_reduction(ReductionOptions{6, 3, 1, 0.1});
  const double secs = seconds_since(start);
  detail_report(report, false);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "PM conditioned on sifting and EB agree exactly on %zu outcomes at M=6, m=3, k=1: "
                "%zu mismatches, total variation %.3g (%.1fs)",
                result.outcomes, result.mismatched, result.total_variation, secs);
  verdict(10, report.passed(), buf);
}

void criterion11(const std::vector<RatePoint>& points) {
  const auto crossings = half_asymptote_crossings(points, 0.5);
  for (const auto& c : crossings) {
    char buf[128];
    if (c.m) {
      std::snprintf(buf, sizeof buf, "delta=%.3f: smallest grid m with rate >= asymptote/2 is %llu", c.delta,
                    static_cast<unsigned long long>(*c.m));
    } else {
      std::snprintf(buf, sizeof buf, "delta=%.3f: no grid m reaches asymptote/2", c.delta);
    }
    detail(buf);
  }
  verdict(11, crossings.size() == kDeltas.size(),
          "half-asymptote crossings recorded for inspection (no printed reference values to compare against)");
}

}  // namespace

int main() {
  criterion1();
  const auto points = criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  criterion11(points);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
