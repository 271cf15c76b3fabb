#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qkd/protocol.hpp"
#include "qkd/verification.hpp"

using namespace qkd;

namespace {

double five_sigma(double p, double n) { return 5.0 * std::sqrt(p * (1.0 - p) / n); }

struct Setup {
  ProtocolParams params;
  BlockCode code;
};

// n = m - k split into 16-bit blocks of an [16, 8] code.
Setup setup(std::size_t m, std::size_t k, double delta, std::size_t t, std::size_t ell, std::uint64_t seed = 1) {
  RandomStream rng(seed);
  LinearCode inner = generate_code(16, 8, rng);
  while (inner.decode_radius() < 1) inner = generate_code(16, 8, rng);
  BlockCode code(inner, m - k);
  ProtocolParams p{m, k, delta, code.r(), t, ell, 0.5};
  return {p, code};
}

ChannelModel eb(double qber) { return ChannelModel{ChannelVariant::eb_honest, qber, 1.0, 0.0}; }

struct FixedSource {
  BitString alice;
  BitString bob;
  RawKeyPair emit(const BitString&, RandomStream&) const { return {alice, bob}; }
};

}  // namespace

TEST(SampleSeeds, RejectsInvalidParams) {
  RandomStream rng(1);
  ProtocolParams p{1, 0, 0.1, 0, 1, 1, 0.5};
  EXPECT_THROW(sample_seeds(p, rng), std::invalid_argument);
  auto s = setup(64, 16, 0.1, 8, 8);
  s.params.ell = 0;
  EXPECT_THROW(sample_seeds(s.params, rng), std::invalid_argument);
}

TEST(SampleSeeds, ShapesAndDeterminism) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  RandomStream a(2);
  RandomStream b(2);
  const Seeds x = sample_seeds(s.params, a);
  EXPECT_EQ(x, sample_seeds(s.params, b));
  EXPECT_EQ(x.phi.size(), 64u);
  ASSERT_EQ(x.pi.size(), 16u);
  EXPECT_TRUE(std::is_sorted(x.pi.begin(), x.pi.end()));
  EXPECT_EQ(std::adjacent_find(x.pi.begin(), x.pi.end()), x.pi.end());
  EXPECT_LT(x.pi.back(), 64u);
  EXPECT_EQ(x.h_ec.n, 48u);
  EXPECT_EQ(x.h_ec.ell, 8u);
  EXPECT_EQ(x.h_pa.ell, 8u);
}

TEST(SampleSeeds, SubsetsUniform) {
  constexpr int kDraws = 60000;
  ProtocolParams p{4, 2, 0.3, 0, 1, 1, 0.5};
  RandomStream rng(3);
  std::map<IndexSet, int> counts;
  for (int i = 0; i < kDraws; ++i) ++counts[sample_seeds(p, rng).pi];
  ASSERT_EQ(counts.size(), 6u);
  for (const auto& [subset, c] : counts) EXPECT_NEAR(c / double(kDraws), 1.0 / 6.0, five_sigma(1.0 / 6.0, kDraws));
}

TEST(Reorder, Examples) {
  const auto [pe, key] = reorder(BitString::from_string("1010"), {0, 2});
  EXPECT_EQ(pe, BitString::from_string("11"));
  EXPECT_EQ(key, BitString::from_string("00"));
  const auto [none, all] = reorder(BitString::from_string("1010"), {});
  EXPECT_EQ(none.size(), 0u);
  EXPECT_EQ(all, BitString::from_string("1010"));
  EXPECT_THROW(reorder(BitString(4), {4}), std::out_of_range);
  EXPECT_THROW(reorder(BitString(4), {1, 1}), std::invalid_argument);
}

TEST(Reorder, IsABijection) {
  RandomStream rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.below(40);
    const std::size_t k = rng.below(m + 1);
    const IndexSet pi = sample_subset(m, k, rng);
    const BitString raw = rng.bits(m);
    const auto [pe, key] = reorder(raw, pi);
    ASSERT_EQ(pe.size(), k);
    ASSERT_EQ(key.size(), m - k);
    // Scatter back and compare.
    BitString back(m);
    std::vector<bool> in_pi(m, false);
    for (std::size_t i = 0; i < k; ++i) {
      back.set(pi[i], pe[i]);
      in_pi[pi[i]] = true;
    }
    std::size_t j = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!in_pi[i]) back.set(i, key[j++]);
    }
    EXPECT_EQ(back, raw);
  }
}

TEST(ParameterEstimation, Examples) {
  RandomStream rng(5);
  const BitString v = rng.bits(10);
  EXPECT_EQ(parameter_estimation(v, v, 0.01), Flag::pass);
  const BitString w = v ^ BitString::from_string("1100000000");
  EXPECT_EQ(parameter_estimation(v, w, 0.2), Flag::abort);
  EXPECT_EQ(parameter_estimation(v, w, 0.25), Flag::pass);
  EXPECT_EQ(parameter_estimation(v, v ^ BitString::from_string("1110000000"), 0.3), Flag::abort);
  EXPECT_EQ(parameter_estimation(v, w, 0.21), Flag::pass);
}

TEST(ErrorCorrection, Examples) {
  const auto rep = LinearCode::from_parity({BitString::from_string("110"), BitString::from_string("011")});
  const ToeplitzSeed h(3, 2, BitString::from_string("1011"));
  const BitString x = BitString::from_string("111");
  auto res = error_correction(x, x, rep, h);
  EXPECT_EQ(res.x_hat, x);
  EXPECT_EQ(res.flag, Flag::pass);
  EXPECT_EQ(res.c_z, synd(rep, x));
  EXPECT_EQ(res.c_t, hash(h, x));
  res = error_correction(x, BitString::from_string("101"), rep, h);
  EXPECT_EQ(res.x_hat, x);
  EXPECT_EQ(res.flag, Flag::pass);
  EXPECT_THROW(error_correction(x, BitString(4), rep, h), std::invalid_argument);
}

TEST(ErrorCorrection, UncorrectableErrorsAreUsuallyCaught) {
  const auto rep = LinearCode::from_parity({BitString::from_string("110"), BitString::from_string("011")});
  const BitString x = BitString::from_string("111");
  const BitString y = BitString::from_string("100");
  // x_hat = 000 != x; exactly the seeds whose hash agrees on x and 000 let it through.
  std::size_t passes = 0;
  std::size_t seeds = 0;
  for (std::uint64_t mask = 0; mask < 16; ++mask) {
    const ToeplitzSeed h(3, 2, detail::unpack(mask, 4));
    const auto res = error_correction(x, y, rep, h);
    EXPECT_EQ(res.x_hat, BitString(3));
    ++seeds;
    passes += res.flag == Flag::pass;
  }
  EXPECT_EQ(passes * 4, seeds);
}

TEST(PrivacyAmplification, Examples) {
  RandomStream rng(6);
  const auto h = sample_seed(20, 6, rng);
  const BitString x = rng.bits(20);
  const auto [ka, kb] = privacy_amplification(x, x, h);
  EXPECT_EQ(ka, kb);
  EXPECT_EQ(ka.size(), 6u);
  EXPECT_THROW(privacy_amplification(x, BitString(19), h), std::invalid_argument);
  // bits[l-1] = 1 and zero elsewhere is the identity matrix.
  BitString bits(7);
  bits.set(3, true);
  const ToeplitzSeed identity(4, 4, bits);
  for (std::uint64_t a = 0; a < 16; ++a) {
    for (std::uint64_t b = 0; b < 16; ++b) {
      const auto [k1, k2] = privacy_amplification(detail::unpack(a, 4), detail::unpack(b, 4), identity);
      EXPECT_EQ(k1 == k2, a == b);
    }
  }
}

TEST(PrivacyAmplification, DistinctInputsCollideWithProbabilityTwoToMinusEll) {
  const BitString x = BitString::from_string("10110");
  const BitString y = BitString::from_string("00111");
  for (std::size_t ell = 1; ell <= 4; ++ell) {
    std::uint64_t collisions = 0;
    const std::size_t len = 5 + ell - 1;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << len); ++mask) {
      const auto [ka, kb] = privacy_amplification(x, y, ToeplitzSeed(5, ell, detail::unpack(mask, len)));
      collisions += ka == kb;
    }
    EXPECT_EQ(collisions << ell, std::uint64_t{1} << len);
  }
}

TEST(RunEb, NoiselessPasses) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  HonestSource source{eb(0.0)};
  for (std::uint64_t i = 0; i < 20; ++i) {
    RandomStream rng = RandomStream::derive(7, "run", i);
    const auto out = run_eb(source, s.params, s.code, rng);
    EXPECT_TRUE(out.flags.all_pass());
    EXPECT_EQ(out.flags.f_si, Flag::absent);
    EXPECT_EQ(out.k_a, out.k_b);
    EXPECT_EQ(out.k_a.size(), 8u);
    EXPECT_EQ(out.transcript.c_v.size(), 16u);
    EXPECT_EQ(out.transcript.c_z.size(), s.params.r);
    EXPECT_EQ(out.transcript.c_t.size(), 8u);
    EXPECT_TRUE(out.transcript.c_omega.empty());
    EXPECT_EQ(out.pe_errors, 0u);
  }
}

TEST(RunEb, DeterministicUnderFixedStream) {
  const auto s = setup(64, 16, 0.2, 8, 8);
  HonestSource source{eb(0.05)};
  RandomStream a(8);
  RandomStream b(8);
  EXPECT_EQ(run_eb(source, s.params, s.code, a), run_eb(source, s.params, s.code, b));
}

TEST(RunEb, UniformNoiseAlmostAlwaysAborts) {
  const auto s = setup(100, 50, 0.05, 8, 4);
  HonestSource source{eb(0.5)};
  int aborts = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RandomStream rng = RandomStream::derive(9, "run", i);
    const auto out = run_eb(source, s.params, s.code, rng);
    if (out.flags.f_pe == Flag::abort) {
      ++aborts;
      EXPECT_EQ(out.flags.f_ec, Flag::abort);
      EXPECT_EQ(out.k_a, BitString(4));
      EXPECT_EQ(out.k_b, BitString(4));
      EXPECT_EQ(out.transcript.c_z, BitString(s.params.r));
      EXPECT_EQ(out.transcript.c_t, BitString(8));
    }
  }
  EXPECT_GE(aborts, 999);
}

TEST(RunEb, PassingRunsAgreeOnTheKey) {
  // Noise below threshold: whenever every flag passes, the keys match (t = 20
  // leaves a 2^-20 chance per run of an undetected mismatch).
  const auto s = setup(96, 32, 0.15, 20, 8);
  HonestSource source{eb(0.03)};
  int passed = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    RandomStream rng = RandomStream::derive(10, "run", i);
    const auto out = run_eb(source, s.params, s.code, rng);
    if (out.flags.all_pass()) {
      ++passed;
      EXPECT_EQ(out.k_a, out.k_b);
    }
  }
  EXPECT_GT(passed, 100);
}

TEST(RunEb, EmitsStepsInProtocolOrder) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  HonestSource source{eb(0.0)};
  RandomStream rng(11);
  std::vector<std::string> steps;
  run_eb(source, s.params, s.code, rng, [&](const TraceEvent& e) { steps.push_back(e.step); });
  EXPECT_EQ(steps, (std::vector<std::string>{"randomization", "measurement", "parameter_estimation",
                                             "error_correction", "privacy_amplification"}));
}

TEST(RunEb, SourceFailureIsARunError) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  FixedSource bad{BitString(63), BitString(63)};
  RandomStream rng(12);
  EXPECT_THROW(run_eb(bad, s.params, s.code, rng), std::runtime_error);
}

TEST(RunEb, RegistersFollowFromSeedsAndRawKeys) {
  const auto s = setup(64, 16, 0.2, 8, 8);
  RandomStream rng(13);
  const BitString alice = rng.bits(64);
  BitString bob = alice;
  bob.flip(3);
  FixedSource source{alice, bob};
  RandomStream run_rng(14);
  const auto out = run_eb(source, s.params, s.code, run_rng);
  RandomStream replay(14);
  const Seeds seeds = sample_seeds(s.params, replay);
  EXPECT_EQ(out.seeds, seeds);
  EXPECT_EQ(out, eb_postprocess(s.params, seeds, alice, bob, s.code));
  const auto [v, x] = reorder(alice, seeds.pi);
  EXPECT_EQ(out.transcript.c_v, v);
  EXPECT_EQ(out.transcript.c_z, synd(s.code, x));
}

TEST(Sift, Examples) {
  const auto res = sift(BitString::from_string("0110"), BitString::from_string("0011"), {0, 1, 2, 3}, 2);
  EXPECT_EQ(res.flag, Flag::pass);
  EXPECT_EQ(res.sigma, (IndexSet{0, 2}));
  const auto fail = sift(BitString::from_string("0110"), BitString::from_string("0011"), {1, 2, 3}, 2);
  EXPECT_EQ(fail.flag, Flag::abort);
  EXPECT_EQ(fail.sigma, (IndexSet{0, 1}));
  EXPECT_EQ(sift(BitString(4), BitString(4), {3, 1}, 2).sigma, (IndexSet{1, 3}));
  EXPECT_THROW(sift(BitString(3), BitString(4), {}, 1), std::invalid_argument);
}

TEST(Sift, OutputPropertiesAndShiftInvariance) {
  RandomStream rng(15);
  int passes = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t M = 4 + rng.below(40);
    const std::size_t m = 1 + rng.below(M / 2);
    const BitString phi_a = rng.bits(M);
    const BitString phi_b = rng.bits(M);
    IndexSet omega;
    for (std::size_t i = 0; i < M; ++i) {
      if (rng.bernoulli(0.7)) omega.push_back(i);
    }
    const auto res = sift(phi_a, phi_b, omega, m);
    ASSERT_EQ(res.sigma.size(), m);
    if (res.flag != Flag::pass) continue;
    ++passes;
    EXPECT_TRUE(std::is_sorted(res.sigma.begin(), res.sigma.end()));
    for (std::size_t i : res.sigma) {
      EXPECT_TRUE(std::binary_search(omega.begin(), omega.end(), i));
      EXPECT_EQ(phi_a[i], phi_b[i]);
    }
    const BitString theta = rng.bits(M);
    const auto shifted = sift(phi_a ^ theta, phi_b ^ theta, omega, m);
    EXPECT_EQ(shifted.flag, Flag::pass);
    EXPECT_EQ(shifted.sigma, res.sigma);
  }
  EXPECT_GT(passes, 1000);
}

TEST(RunPm, LosslessNoiselessPasses) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  const ChannelModel channel{ChannelVariant::pm_honest, 0.0, 1.0, 0.0};
  for (std::uint64_t i = 0; i < 20; ++i) {
    RandomStream rng = RandomStream::derive(16, "run", i);
    const auto out = run_pm(channel, 4 * 64, s.params, s.code, rng);
    EXPECT_TRUE(out.flags.all_pass());
    EXPECT_EQ(out.flags.f_si, Flag::pass);
    EXPECT_EQ(out.k_a, out.k_b);
    EXPECT_EQ(out.transcript.c_omega.size(), 256u);
    EXPECT_EQ(out.transcript.c_sigma.size(), 64u);
    EXPECT_EQ(out.transcript.s_phi_b, out.seeds.phi_b);
    EXPECT_EQ(out.seeds.phi, out.seeds.phi_a.select(out.transcript.c_sigma));
  }
}

TEST(RunPm, HalfTransmittanceSiftsAQuarter) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  const ChannelModel channel{ChannelVariant::pm_honest, 0.0, 0.5, 0.0};
  const std::size_t M = 4 * 64 * 2;
  double conclusive = 0.0;
  int passes = 0;
  constexpr int kRuns = 200;
  for (std::uint64_t i = 0; i < kRuns; ++i) {
    RandomStream rng = RandomStream::derive(17, "run", i);
    const auto out = run_pm(channel, M, s.params, s.code, rng);
    conclusive += static_cast<double>(out.transcript.c_omega.size());
    passes += out.flags.f_si == Flag::pass;
  }
  const double rounds = static_cast<double>(M) * kRuns;
  EXPECT_NEAR(conclusive / rounds, 0.5, five_sigma(0.5, rounds));
  EXPECT_EQ(passes, kRuns);
}

TEST(RunPm, SiftingFailureZeroFillsEverything) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  const ChannelModel channel{ChannelVariant::pm_honest, 0.0, 0.1, 0.0};
  RandomStream rng(18);
  const auto out = run_pm(channel, 64, s.params, s.code, rng);
  EXPECT_EQ(out.flags, (Flags{Flag::abort, Flag::abort, Flag::abort}));
  EXPECT_EQ(out.seeds.phi, BitString(64));
  EXPECT_EQ(out.k_a, BitString(8));
  EXPECT_EQ(out.k_b, BitString(8));
  EXPECT_EQ(out.transcript.c_v, BitString(16));
  EXPECT_EQ(out.transcript.c_z, BitString(s.params.r));
  EXPECT_EQ(out.transcript.c_t, BitString(8));
  IndexSet dummy(64);
  std::iota(dummy.begin(), dummy.end(), std::size_t{0});
  EXPECT_EQ(out.transcript.c_sigma, dummy);
}

TEST(RunPm, InterceptResendAborts) {
  const auto s = setup(300, 200, 0.1, 8, 4);
  const ChannelModel channel{ChannelVariant::pm_intercept_resend, 0.0, 1.0, 1.0};
  int aborts = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RandomStream rng = RandomStream::derive(19, "run", i);
    aborts += run_pm(channel, 4 * 300, s.params, s.code, rng).flags.f_pe == Flag::abort;
  }
  EXPECT_GE(aborts, 999);
}

TEST(RunPm, RejectsShortRawBlock) {
  const auto s = setup(64, 16, 0.1, 8, 8);
  RandomStream rng(20);
  EXPECT_THROW(run_pm(ChannelModel{ChannelVariant::pm_honest, 0.0, 1.0, 0.0}, 63, s.params, s.code, rng),
               std::invalid_argument);
  EXPECT_THROW(run_pm(ChannelModel{}, 256, s.params, s.code, rng), std::invalid_argument);
}

TEST(RunPm, Deterministic) {
  const auto s = setup(64, 16, 0.2, 8, 8);
  const ChannelModel channel{ChannelVariant::pm_intercept_resend, 0.02, 0.6, 0.3};
  RandomStream a(21);
  RandomStream b(21);
  EXPECT_EQ(run_pm(channel, 512, s.params, s.code, a), run_pm(channel, 512, s.params, s.code, b));
}

TEST(Verification, CorrectnessBoundAtSmallScale) {
  const auto report = verify_correctness(22, CorrectnessOptions{20000, 8, 1});
  EXPECT_TRUE(report.passed()) << report.text();
}

TEST(Verification, ReductionExactAtSmallScale) {
  const auto res = exact_reduction(ReductionOptions{5, 2, 1, 0.1});
  EXPECT_EQ(res.mismatched, 0u);
  EXPECT_EQ(res.total_variation, 0.0);
  EXPECT_GT(res.outcomes, 0u);
  EXPECT_TRUE(verify_reduction(ReductionOptions{5, 2, 1, 0.1}).passed());
}
