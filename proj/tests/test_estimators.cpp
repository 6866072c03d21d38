#include <gtest/gtest.h>

#include <cmath>

#include "kbrw/error.hpp"
#include "kbrw/estimators.hpp"

using namespace kbrw;

namespace {

const StepModel& two_point() {
  static const StepModel m = calibrate_critical(TwoPoint{}, 2);
  return m;
}

const StepModel& lattice() {
  static const StepModel m = calibrate_critical(UserLattice{{-2, -1, 1, 2}, {0.3, 0.3, 0.25, 0.15}}, 2);
  return m;
}

TreeMcOptions opts(std::uint64_t reps, std::uint64_t seed) {
  TreeMcOptions o;
  o.reps = reps;
  o.seed = seed;
  return o;
}

}  // namespace

TEST(Wilson, Endpoints) {
  EXPECT_EQ(wilson_ci(0, 100).lo, 0.0);
  EXPECT_GT(wilson_ci(0, 100).hi, 0.0);
  EXPECT_EQ(wilson_ci(100, 100).hi, 1.0);
  const WilsonInterval ci = wilson_ci(50, 100, 1.96);
  EXPECT_NEAR(ci.lo, 0.4038, 1e-4);
  EXPECT_NEAR(ci.hi, 0.5962, 1e-4);
  EXPECT_THROW(wilson_ci(5, 0), Error);
  EXPECT_THROW(wilson_ci(5, 4), Error);
}

TEST(Wilson, ContainsPointEstimate) {
  for (std::uint64_t n : {1u, 7u, 100u, 12345u})
    for (std::uint64_t h = 0; h <= n; h += std::max<std::uint64_t>(1, n / 7)) {
      const WilsonInterval ci = wilson_ci(h, n);
      const double p = double(h) / n;
      EXPECT_LE(ci.lo, p + 1e-15);
      EXPECT_GE(ci.hi, p - 1e-15);
      EXPECT_GE(ci.lo, 0.0);
      EXPECT_LE(ci.hi, 1.0);
    }
}

TEST(TailCurve, TallyMechanics) {
  TailCurve c;
  c.init(TailStat::progeny, {1, 10});
  c.tally(5, false);
  EXPECT_EQ(c.hits, (std::vector<std::uint64_t>{1, 0}));
  EXPECT_EQ(c.trials, (std::vector<std::uint64_t>{1, 1}));
}

TEST(TailCurve, CensoredRunCertifiesBelowAndIsExcludedAbove) {
  TailCurve c;
  c.init(TailStat::progeny, {2, 5, 50});
  c.tally(10, true);
  EXPECT_EQ(c.hits, (std::vector<std::uint64_t>{1, 1, 0}));
  EXPECT_EQ(c.trials, (std::vector<std::uint64_t>{1, 1, 0}));
  EXPECT_EQ(c.excluded, (std::vector<std::uint64_t>{0, 0, 1}));
  EXPECT_EQ(c.censored_reps, 1u);
  EXPECT_EQ(c.ci(2).lo, 0.0);
  EXPECT_EQ(c.ci(2).hi, 1.0);
}

TEST(TailCurve, MaximumCountsAtLevel) {
  TailCurve c;
  c.init(TailStat::maximum, {3, 4});
  c.tally(3, false);
  EXPECT_EQ(c.hits, (std::vector<std::uint64_t>{1, 0}));
}

TEST(TailCurve, MergeIsExactAndRejectsMismatch) {
  TailCurve a, b, c;
  a.init(TailStat::progeny, {1, 2});
  b.init(TailStat::progeny, {1, 2});
  a.tally(3, false);
  b.tally(1, false);
  a.merge(b);
  EXPECT_EQ(a.hits, (std::vector<std::uint64_t>{1, 1}));
  EXPECT_EQ(a.reps, 2u);
  c.init(TailStat::progeny, {1, 3});
  EXPECT_THROW(a.merge(c), Error);
}

TEST(TailZ, ZeroThresholdAndMonotone) {
  const TailCurve c = tail_curve_Z(two_point(), 0.0, {0, 1, 3, 10, 30}, opts(50'000, 1));
  EXPECT_DOUBLE_EQ(c.p_hat(0), 1.0);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c.p_hat(i), c.p_hat(i - 1));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(c.excluded[i], 0u);
}

TEST(TailZ, GridValidation) {
  EXPECT_THROW(tail_curve_Z(two_point(), 0.0, {}, opts(10, 1)), Error);
  EXPECT_THROW(tail_curve_Z(two_point(), 0.0, {5, 3}, opts(10, 1)), Error);
  TreeMcOptions o = opts(10, 1);
  o.caps.max_total_counted = 100;
  EXPECT_THROW(tail_curve_Z(two_point(), 0.0, {10, 1000}, o), Error);
}

TEST(TailZ, ScaledStatistic) {
  const TailCurve c = tail_curve_Z(two_point(), 0.0, {10, 100}, opts(20'000, 2));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double n = c.thresholds[i];
    EXPECT_NEAR(c.scaled(i), n * std::log(n) * std::log(n) * c.p_hat(i), 1e-12 * (1 + c.scaled(i)));
  }
}

TEST(TailM, LevelAtStartIsCertain) {
  const TailCurve c = tail_curve_M(two_point(), 2.0, {2, 3, 5}, opts(5'000, 3));
  EXPECT_DOUBLE_EQ(c.p_hat(0), 1.0);
  const TailCurve e = tail_curve_M_exact(two_point(), 2, {2, 3, 5});
  EXPECT_DOUBLE_EQ(e.p_hat(0), 1.0);
  EXPECT_TRUE(e.exact);
}

TEST(Moments, TwoPointClosedForms) {
  const double rho = two_point().rho();
  const TreeMcOptions o = opts(200'000, 4);
  const MomentReport z = moment_Zak_many_to_one(two_point(), 5, 1, 8, o);
  const double pz = (8 - 5 + 1.0) / (8 - 1 + 2.0);
  const double scale = std::exp(rho * (5 - 1 + 1));
  EXPECT_NEAR(z.value, scale * pz, 3.0 * scale * std::sqrt(pz * (1 - pz) / o.reps));
  const MomentReport h = moment_H_many_to_one(two_point(), 2, 7, o);
  const double ph = 3.0 / 9.0;
  const double sh = std::exp(rho * (2 - 7 - 1));
  EXPECT_NEAR(h.value, sh * ph, 3.0 * sh * std::sqrt(ph * (1 - ph) / o.reps));
}

TEST(Moments, ThreeSourcesAgreeOnLattice) {
  const TreeMcOptions o = opts(100'000, 5);
  const MomentReport ex = moment_Zak_exact(lattice(), 12, 0, 12);
  const MomentReport m2o = moment_Zak_many_to_one(lattice(), 12, 0, 12, o);
  EXPECT_TRUE(agree(ex, m2o)) << ex.value << " " << m2o.value << " " << m2o.std_error;
  const MomentReport d = moment_Zak_direct(lattice(), 5, 1, 7, o);
  const MomentReport e2 = moment_Zak_exact(lattice(), 5, 1, 7);
  EXPECT_TRUE(agree(d, e2)) << d.value << " " << e2.value << " " << d.std_error;
  EXPECT_NEAR(d.scaled, d.value * 7 / (std::exp(lattice().rho() * 4) * 3.0), 1e-12 * d.scaled);

  const MomentReport hd = moment_H_direct(lattice(), 2, 6, o);
  const MomentReport hm = moment_H_many_to_one(lattice(), 2, 6, o);
  const MomentReport he = moment_H_exact(lattice(), 2, 6);
  EXPECT_TRUE(agree(hd, he));
  EXPECT_TRUE(agree(hm, he));
  EXPECT_TRUE(agree(hd, hm));
}

TEST(Moments, ManyToOneValidation) {
  const TreeMcOptions o = opts(10, 6);
  EXPECT_THROW(moment_Zak_many_to_one(two_point(), 0, 1, 5, o), Error);
  EXPECT_THROW(moment_H_many_to_one(two_point(), 6, 5, o), Error);
  EXPECT_THROW(moment_Zak_direct(two_point(), 1, 0, 5, opts(0, 1)), Error);
}

TEST(Agree, UsesCombinedSpread) {
  MomentReport a, b;
  a.value = 1.0;
  a.std_error = 0.1;
  b.value = 1.4;
  b.std_error = 0.1;
  EXPECT_TRUE(agree(a, b));
  b.value = 1.5;
  EXPECT_FALSE(agree(a, b));
}

TEST(LevelChoice, UpperRootAndResidual) {
  const double rho = two_point().rho();
  const double k = choose_k_upper(two_point(), 1e4);
  EXPECT_GT(k, 8.0);
  EXPECT_LT(k, 9.0);
  EXPECT_LE(std::abs(std::exp(rho * k) / k - 1e4) / 1e4, 1e-10);
  EXPECT_LT(std::exp(8 * rho) / 8, 1e4);
  EXPECT_GT(std::exp(9 * rho) / 9, 1e4);
  EXPECT_GT(k, 1.0 / rho);
}

TEST(LevelChoice, LowerWithMuTwoEqualsUpper) {
  for (double n : {50.0, 1e3, 1e6, 1e12})
    EXPECT_DOUBLE_EQ(choose_k_lower(two_point(), n, 2.0), choose_k_upper(two_point(), n));
}

TEST(LevelChoice, SpacingApproachesInverseRho) {
  const double rho = two_point().rho();
  double prev = 1.0;
  for (double n : {1e4, 1e6, 1e9, 1e12}) {
    const double dev = std::abs((choose_k_upper(two_point(), n) - choose_k_upper(two_point(), n / std::exp(1.0))) * rho - 1.0);
    EXPECT_LT(dev, prev);
    prev = dev;
  }
  const double d6 = (choose_k_upper(two_point(), 1e6) - choose_k_upper(two_point(), 1e6 / std::exp(1.0))) * rho;
  EXPECT_NEAR(d6, 1.0, 0.08);
  const double d9 = (choose_k_upper(two_point(), 1e9) - choose_k_upper(two_point(), 1e9 / std::exp(1.0))) * rho;
  EXPECT_NEAR(d9, 1.0, 0.05);
}

TEST(LevelChoice, Errors) {
  EXPECT_THROW(choose_k_upper(two_point(), 1.0), Error);
  EXPECT_THROW(choose_k_lower(two_point(), 1e4, 0.0), Error);
  EXPECT_THROW(choose_k_lower(two_point(), 1e4, -1.0), Error);
}

TEST(TwoStage, ProductBoundsAndLabel) {
  TwoStageOptions o;
  o.reps_stage1 = 20'000;
  o.reps_stage2 = 500;
  o.seed = 7;
  const TwoStageResult r = two_stage_tail(two_point(), 0.0, 1.0, 300.0, o);
  EXPECT_EQ(r.label, "lower-bound-biased");
  EXPECT_LE(r.estimate, 1.0);
  EXPECT_LE(r.estimate, std::min(r.reach.p, r.progeny.p) + 1e-300);
  EXPECT_TRUE(r.reach.exact);
  EXPECT_GT(r.mu_hat, 0.0);
  EXPECT_TRUE(r.level == std::floor(r.k_star) || r.level == std::ceil(r.k_star));
  EXPECT_LE(r.ci.lo, r.estimate);
  EXPECT_GE(r.ci.hi, r.estimate);
}

TEST(TwoStage, BelowDirectEstimate) {
  TwoStageOptions o;
  o.reps_stage1 = 50'000;
  o.reps_stage2 = 1000;
  o.seed = 8;
  const TwoStageResult r = two_stage_tail(two_point(), 0.0, 1.0, 1000.0, o);
  const TailCurve d = tail_curve_Z(two_point(), 0.0, {1000.0}, opts(2'000'000, 9));
  ASSERT_GT(d.hits[0], 0u);
  const double rel = std::sqrt((1 - d.p_hat(0)) / d.hits[0]);
  EXPECT_LE(r.estimate, d.p_hat(0) * (1 + 3 * rel));
}

TEST(TwoStage, GaussianUsesSimulatedReach) {
  TwoStageOptions o;
  o.reps_stage1 = 20'000;
  o.reps_stage2 = 300;
  o.seed = 10;
  const StepModel g = calibrate_critical(Gaussian{0.0, 1.0}, 2);
  const TwoStageResult r = two_stage_tail(g, 0.0, 0.5, 100.0, o);
  EXPECT_FALSE(r.reach.exact);
  EXPECT_DOUBLE_EQ(r.level, r.k_star);
  EXPECT_LE(r.estimate, 1.0);
}

TEST(TwoStage, Validation) {
  TwoStageOptions o;
  EXPECT_THROW(two_stage_tail(two_point(), 0.0, 1.0, 0.5, o), Error);
  EXPECT_THROW(two_stage_tail(two_point(), 0.0, -1.0, 100.0, o), Error);
  EXPECT_THROW(two_stage_tail(two_point(), 0.0, 50.0, 100.0, o), Error);
  o.reps_stage2 = 0;
  EXPECT_THROW(two_stage_tail(two_point(), 0.0, 1.0, 100.0, o), Error);
}

TEST(BandRatio, Basics) {
  EXPECT_DOUBLE_EQ(band_ratio({1.0, 2.0, 1.5}), 2.0);
  EXPECT_TRUE(std::isinf(band_ratio({1.0, 0.0})));
  EXPECT_TRUE(std::isinf(band_ratio({})));
}
