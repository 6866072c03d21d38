#include <gtest/gtest.h>

#include <cmath>

#include "kbrw/brw_engine.hpp"
#include "kbrw/error.hpp"
#include "kbrw/estimators.hpp"

using namespace kbrw;

namespace {

const StepModel& two_point() {
  static const StepModel m = calibrate_critical(TwoPoint{}, 2);
  return m;
}

double p_two_point() { return std::get<TwoPoint>(two_point().family()).p; }

// A lattice law that jumps by two in either direction with non-trivial overshoot.
const StepModel& lattice() {
  static const StepModel m = calibrate_critical(UserLattice{{-2, -1, 1, 2}, {0.3, 0.3, 0.25, 0.15}}, 2);
  return m;
}

}  // namespace

TEST(BrwConfig, Validation) {
  EXPECT_THROW(BrwConfig({-1.0}).validate(), Error);
  EXPECT_THROW((BrwConfig{5.0, std::nullopt, 3.0}).validate(), Error);
  EXPECT_THROW((BrwConfig{1.0, 4.0, 3.0}).validate(), Error);
  EXPECT_THROW((BrwConfig{1.0, -1.0, std::nullopt}).validate(), Error);
  BrwConfig c{0.0};
  c.caps.max_generations = 0;
  EXPECT_THROW(c.validate(), Error);
  BrwConfig s{0.0};
  s.stop_zak_above = 3;
  EXPECT_THROW(s.validate(), Error);
}

TEST(Brw, ImmediateExtinction) {
  for (int b : {2, 3, 5}) {
    const StepModel down(UserLattice{{-1, 1}, {1.0 - 1e-300, 1e-300}}, b);
    Rng rng(1, 0);
    const BrwRun r = run_brw(down, BrwConfig{0.0}, rng);
    EXPECT_EQ(r.Z, 1u);
    EXPECT_EQ(r.Z0, static_cast<std::uint64_t>(b));
    EXPECT_EQ(r.T_ext, 1u);
    EXPECT_EQ(r.Z0, 1 + static_cast<std::uint64_t>(b - 1) * r.Z);
  }
}

TEST(Brw, LeafIdentityFreeAndStrip) {
  for (int b : {2, 3, 4}) {
    const StepModel m = calibrate_critical(TwoPoint{}, b);
    BrwSimulator free_sim(m, BrwConfig{0.0});
    BrwSimulator strip_sim(m, BrwConfig{2.0, 1.0, 6.0});
    for (std::uint64_t rep = 0; rep < 3000; ++rep) {
      Rng r1(2, rep), r2(3, rep);
      const BrwRun a = free_sim(r1);
      ASSERT_FALSE(a.is_censored());
      EXPECT_EQ(a.Z0, 1 + (b - 1) * a.Z);
      EXPECT_EQ(a.Hk, 0u);
      const BrwRun s = strip_sim(r2);
      EXPECT_EQ(s.Z0 + s.Hk, 1 + (b - 1) * s.Z);
      EXPECT_LE(s.M, 6.0);
    }
  }
}

TEST(Brw, GaussianLeafIdentity) {
  const StepModel g = calibrate_critical(Gaussian{0.0, 1.0}, 3);
  BrwSimulator sim(g, BrwConfig{1.5, 0.5, 4.0});
  for (std::uint64_t rep = 0; rep < 3000; ++rep) {
    Rng rng(4, rep);
    const BrwRun r = sim(rng);
    EXPECT_EQ(r.Z0 + r.Hk, 1 + 2 * r.Z);
  }
}

TEST(Brw, RootBelowCountLevel) {
  Rng rng(5, 0);
  const BrwRun r = run_brw(two_point(), BrwConfig{0.0, 1.0, 5.0}, rng);
  EXPECT_EQ(r.Zak, 1u);
}

TEST(Brw, FromTopAllAbsorbed) {
  const StepModel up(UserLattice{{-1, 1}, {1e-300, 1.0 - 1e-300}}, 2);
  Rng rng(6, 0);
  const BrwRun r = run_brw_from_top(up, 1.0, 5.0, BrwCaps{}, rng);
  EXPECT_EQ(r.Zak, 0u);
  EXPECT_EQ(r.Hk, 2u);
  EXPECT_EQ(r.Z, 1u);
  EXPECT_THROW(run_brw_from_top(up, 5.0, 5.0, BrwCaps{}, rng), Error);
}

TEST(Brw, CapsCensorWithoutThrowing) {
  BrwConfig c{0.0};
  c.caps.max_generations = 2;
  BrwSimulator sim(two_point(), c);
  bool saw = false;
  for (std::uint64_t rep = 0; rep < 5000 && !saw; ++rep) {
    Rng rng(7, rep);
    const BrwRun r = sim(rng);
    if (r.is_censored()) {
      EXPECT_EQ(r.censored, CapKind::generations);
      EXPECT_EQ(r.T_ext, 2u);
      saw = true;
    }
  }
  EXPECT_TRUE(saw);

  BrwConfig t{0.0};
  t.caps.max_total_counted = 3;
  BrwSimulator tsim(two_point(), t);
  for (std::uint64_t rep = 0; rep < 5000; ++rep) {
    Rng rng(8, rep);
    const BrwRun r = tsim(rng);
    if (r.is_censored()) EXPECT_GT(r.Z, 3u);
  }
}

TEST(Brw, ZakStopIsNotCensoring) {
  BrwConfig c{8.0, 1.0, 8.0};
  c.stop_zak_above = 10;
  BrwSimulator sim(two_point(), c);
  int stopped = 0;
  for (std::uint64_t rep = 0; rep < 2000; ++rep) {
    Rng rng(9, rep);
    const BrwRun r = sim(rng);
    EXPECT_FALSE(r.is_censored());
    if (r.stopped) {
      ++stopped;
      EXPECT_GT(r.Zak, 10u);
    }
  }
  EXPECT_GT(stopped, 0);
}

TEST(Brw, ReproducibleGivenStream) {
  BrwSimulator a(lattice(), BrwConfig{3.0, 1.0, 9.0});
  BrwSimulator b(lattice(), BrwConfig{3.0, 1.0, 9.0});
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    Rng r1(10, rep), r2(10, rep);
    EXPECT_EQ(a(r1), b(r2));
  }
}

TEST(Brw, MeanProgenyFiniteAndBelowExactLimit) {
  // E^0[Z]: h = 1 + b E[h(y+s)] on a wide strip, converged in the width.
  const StepModel& m = two_point();
  auto strip_mean = [&](int k) {
    const LatticeStrip strip(0, k, m.lattice_law());
    const StripSolver solver(strip, 2.0, m.rho());
    return solver.solve(std::vector<double>(static_cast<std::size_t>(k) + 1, 1.0))[0];
  };
  // Width truncation leaves about C/k: increments halve as k doubles.
  const double h60 = strip_mean(60);
  const double h120 = strip_mean(120);
  const double h240 = strip_mean(240);
  const double d1 = h120 - h60;
  const double d2 = h240 - h120;
  ASSERT_GT(d2, 0.0);
  EXPECT_NEAR(d2 / d1, 0.5, 0.05);
  const double limit = h240 + d2;
  EXPECT_TRUE(std::isfinite(limit));
  // P(Z > n) ~ 1/(n ln^2 n): the sample mean misses the tail sum beyond the
  // sample size (about 3 / ln N here), so it sits below the limit and rises with N.
  auto mc_mean = [&](std::uint64_t reps, std::uint64_t seed) {
    BrwSimulator sim(m, BrwConfig{0.0});
    MomentAccumulator acc;
    for (std::uint64_t rep = 0; rep < reps; ++rep) {
      Rng rng(seed, rep);
      acc.add(static_cast<double>(sim(rng).Z));
    }
    return acc.mean();
  };
  const double big = mc_mean(1'000'000, 11);
  EXPECT_LT(big, limit);
  EXPECT_GT(big, 0.75 * limit);
}

TEST(ExactMoments, TwoByTwoSystem) {
  const double p = p_two_point();
  const double m0 = 2 * (1 - p) / (1 - 4 * p * (1 - p));
  EXPECT_NEAR(exact_brw_first_moment(two_point(), 0, 1, 0), m0, 1e-12);
  EXPECT_NEAR(exact_brw_first_moment(two_point(), 0, 1, 0), 2.48803387, 1e-8);
  EXPECT_NEAR(exact_brw_first_moment(two_point(), 0, 1, 1), 2 * (1 - p) * m0, 1e-12);
  EXPECT_NEAR(exact_brw_first_moment(two_point(), 0, 1, 1), 4.64273441, 1e-8);
  EXPECT_DOUBLE_EQ(exact_brw_first_moment(two_point(), 0, 1, -1), 1.0);
  EXPECT_DOUBLE_EQ(exact_brw_first_moment(two_point(), 0, 1, 2), 0.0);

  const double s0 = exact_brw_second_moment(two_point(), 0, 1, 0);
  const double s1 = exact_brw_second_moment(two_point(), 0, 1, 1);
  EXPECT_NEAR(s0, 8.54012231, 1e-7);
  EXPECT_NEAR(s1, 26.71357659, 1e-7);
  EXPECT_GE(s0, m0 * m0);
  EXPECT_GE(s1, 4 * (1 - p) * (1 - p) * m0 * m0);
  EXPECT_DOUBLE_EQ(exact_brw_second_moment(two_point(), 3, 5, 2), 1.0);
}

TEST(ExactMoments, ScaledAndUnscaledRoutesAgree) {
  for (int k : {4, 8, 12}) {
    const auto s = exact_brw_first_moment_profile(lattice(), 1, k);
    const auto u = exact_brw_first_moment_profile_unscaled(lattice(), 1, k);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], u[i], 1e-9 * s[i]);
  }
}

TEST(ExactMoments, CauchySchwarz) {
  const auto m1 = exact_brw_first_moment_profile(lattice(), 0, 15);
  const auto m2 = exact_brw_second_moment_profile(lattice(), 0, 15);
  for (std::size_t i = 0; i < m1.size(); ++i) EXPECT_GE(m2[i], m1[i] * m1[i]);
}

TEST(ExactMoments, TwoPointManyToOneClosedForm) {
  // Tilted walk is simple symmetric with unit undershoot.
  const double rho = two_point().rho();
  for (auto [y, a, k] : {std::array<int, 3>{3, 0, 6}, {5, 2, 9}, {4, 4, 4}}) {
    const double closed = std::exp(rho * (y - a + 1)) * (k - y + 1.0) / (k - a + 2.0);
    EXPECT_NEAR(exact_brw_first_moment(two_point(), a, k, y), closed, 1e-10 * closed);
  }
  for (auto [x, k] : {std::array<int, 2>{0, 5}, {3, 9}}) {
    const double closed = std::exp(rho * (x - k - 1)) * (x + 1.0) / (k + 2.0);
    EXPECT_NEAR(exact_brw_first_moment_H(two_point(), k, x), closed, 1e-10 * closed);
  }
}

TEST(ExactMoments, BandsOverK) {
  const double rho = two_point().rho();
  std::vector<double> b1, b2, bh;
  for (int k : {8, 12, 16, 20}) {
    const double e = std::exp(-rho * k);
    b1.push_back(k * e * exact_brw_first_moment(two_point(), 0, k, k));
    b2.push_back(double(k) * k * e * e * exact_brw_second_moment(two_point(), 0, k, k));
  }
  const double rl = lattice().rho();
  for (int k = 8; k <= 24; ++k) bh.push_back(k * std::exp(rl * k) * exact_brw_first_moment_H(lattice(), k, 0));
  EXPECT_LE(band_ratio(b1), 2.0);
  EXPECT_LE(band_ratio(b2), 2.0);
  EXPECT_LE(band_ratio(bh), 2.0);
}

TEST(StripSurvival, TrivialAndScalar) {
  EXPECT_DOUBLE_EQ(exact_strip_survival(two_point(), 4, 4), 1.0);
  EXPECT_THROW(exact_strip_survival(two_point(), 3, 4), Error);
  // Levels reached only by exceeding 1: q = (p ((1-p) q)^2 + (1 - p))^2.
  const double p = p_two_point();
  double q = 1.0;
  for (int i = 0; i < 200; ++i) q = std::pow(p * std::pow((1 - p) * q, 2) + (1 - p), 2);
  EXPECT_NEAR(exact_strip_survival(two_point(), 2, 0), 1.0 - q, 1e-12);
  // k = 1: one step decides.
  EXPECT_NEAR(exact_strip_survival(two_point(), 1, 0), 1.0 - std::pow(1 - p, 2), 1e-14);
}

TEST(StripSurvival, MatchesDirectSimulation) {
  const std::vector<double> grid = {2, 4, 6};
  TreeMcOptions o;
  o.reps = 400'000;
  o.seed = 12;
  const TailCurve mc = tail_curve_M(lattice(), 0.0, grid, o);
  const TailCurve ex = tail_curve_M_exact(lattice(), 0, {2, 4, 6});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double p = ex.p_hat(i);
    EXPECT_NEAR(mc.p_hat(i), p, 4.0 * std::sqrt(p * (1 - p) / o.reps)) << grid[i];
  }
}

TEST(StripSurvival, MaximumBand) {
  const double rho = two_point().rho();
  std::vector<double> v;
  std::vector<int> ks;
  for (int k = 6; k <= 30; k += 4) ks.push_back(k);
  const TailCurve c = tail_curve_M_exact(two_point(), 0, ks);
  for (std::size_t i = 0; i < c.size(); ++i) {
    v.push_back(c.scaled(i));
    EXPECT_NEAR(c.scaled(i), ks[i] * std::exp(rho * ks[i]) * c.p_hat(i), 1e-9 * c.scaled(i));
  }
  EXPECT_LE(band_ratio(v), 2.0);
}

TEST(StripSurvival, NonConvergenceIsReported) {
  try {
    exact_strip_survival_solve(two_point(), 30, 0, 1e-12, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::convergence);
  }
}

TEST(ExactMoments, RequireLattice) {
  const StepModel g = calibrate_critical(Gaussian{0.0, 1.0}, 2);
  EXPECT_THROW(exact_brw_first_moment(g, 0, 5, 2), Error);
  EXPECT_THROW(exact_strip_survival(g, 5, 0), Error);
}
