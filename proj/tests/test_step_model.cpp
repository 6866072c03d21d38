#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>

#include "kbrw/error.hpp"
#include "kbrw/step_model.hpp"

using namespace kbrw;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no kbrw::Error thrown";
  return ErrorKind::validation;
}

}  // namespace

TEST(StepModel, RejectsBadParameters) {
  EXPECT_EQ(kind_of([] { StepModel(TwoPoint{0.3}, 1); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(TwoPoint{0.0}, 2); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(TwoPoint{1.0}, 2); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(Gaussian{-1.0, 0.0}, 2); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(UserLattice{{-1, 1}, {0.5, 0.4}}, 2); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(UserLattice{{1, 2}, {0.5, 0.5}}, 2); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(UserLattice{{-1, -1, 1}, {0.3, 0.3, 0.4}}, 2); }), ErrorKind::validation);
  EXPECT_EQ(kind_of([] { StepModel(UserLattice{{-1, 1}, {0.5}}, 2); }), ErrorKind::validation);
}

TEST(StepModel, NoInteriorMinimumIsDomainError) {
  // Mean >= 0: phi is increasing at 0 and the infimum on t > 0 is not attained.
  StepModel up(TwoPoint{0.6}, 2);
  EXPECT_EQ(kind_of([&] { up.find_rho(); }), ErrorKind::domain);
  StepModel centred(Gaussian{0.0, 1.0}, 2);
  EXPECT_EQ(kind_of([&] { centred.find_rho(); }), ErrorKind::domain);
}

TEST(StepModel, RhoRequiresSolve) {
  StepModel m(TwoPoint{0.1}, 2);
  EXPECT_FALSE(m.has_rho());
  EXPECT_THROW(m.rho(), Error);
  m.find_rho();
  EXPECT_TRUE(m.has_rho());
  EXPECT_NEAR(m.rho(), 0.5 * std::log(0.9 / 0.1), 1e-10);
}

TEST(StepModel, LaplaceDerivativeMatchesFiniteDifference) {
  const StepModel models[] = {StepModel(TwoPoint{0.2}, 2), StepModel(Gaussian{-0.7, 1.3}, 3),
                              StepModel(UserLattice{{-2, 0, 3}, {0.5, 0.3, 0.2}}, 2)};
  for (const auto& m : models) {
    for (double t : {0.1, 0.5, 1.2}) {
      const double h = 1e-6;
      const double fd = (m.laplace(t + h) - m.laplace(t - h)) / (2 * h);
      EXPECT_NEAR(m.laplace_derivative(t), fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Calibration, TwoPointClosedForm) {
  const StepModel m = calibrate_critical(TwoPoint{}, 2);
  EXPECT_NEAR(std::get<TwoPoint>(m.family()).p, 0.0669873, 1e-7);
  EXPECT_NEAR(std::get<TwoPoint>(m.family()).p, (2.0 - std::sqrt(3.0)) / 4.0, 1e-12);
  EXPECT_NEAR(m.rho(), std::log(2.0 + std::sqrt(3.0)), 1e-10);
  EXPECT_NEAR(m.rho(), 1.3169579, 1e-7);
  EXPECT_NEAR(m.criticality_residual(), 0.0, 1e-12);
}

TEST(Calibration, TwoPointOtherBranching) {
  for (int b : {3, 4, 7}) {
    const StepModel m = calibrate_critical(TwoPoint{}, b);
    const double p = (1.0 - std::sqrt(1.0 - 1.0 / (b * b))) / 2.0;
    EXPECT_NEAR(std::get<TwoPoint>(m.family()).p, p, 1e-12) << b;
    EXPECT_NEAR(m.phi_at_rho(), 1.0 / b, 1e-12);
  }
  EXPECT_NEAR(std::get<TwoPoint>(calibrate_critical(TwoPoint{}, 4).family()).p, 0.015877081724072872, 1e-14);
}

TEST(Calibration, GaussianClosedForm) {
  const StepModel m = calibrate_critical(Gaussian{0.0, 1.0}, 2);
  EXPECT_NEAR(std::get<Gaussian>(m.family()).mu, -1.1774100, 1e-7);
  EXPECT_NEAR(m.rho(), 1.1774100, 1e-7);
  const StepModel m3 = calibrate_critical(Gaussian{0.0, 2.0}, 3);
  EXPECT_NEAR(std::get<Gaussian>(m3.family()).mu, -2.0 * std::sqrt(2.0 * std::log(3.0)), 1e-10);
  EXPECT_NEAR(m3.rho(), std::sqrt(2.0 * std::log(3.0)) / 2.0, 1e-9);
  EXPECT_NEAR(m3.criticality_residual(), 0.0, 1e-10);
}

TEST(Calibration, UserLatticeReweighting) {
  // Uniform +-1 weights reweight to the two-point critical law.
  const StepModel m = calibrate_critical(UserLattice{{-1, 1}, {0.5, 0.5}}, 2);
  const auto& u = std::get<UserLattice>(m.family());
  EXPECT_NEAR(u.probs[1], (2.0 - std::sqrt(3.0)) / 4.0, 1e-10);
  EXPECT_NEAR(m.rho(), std::log(2.0 + std::sqrt(3.0)), 1e-8);

  const StepModel w = calibrate_critical(UserLattice{{-2, -1, 1, 2}, {0.3, 0.3, 0.25, 0.15}}, 2);
  EXPECT_NEAR(w.criticality_residual(), 0.0, 1e-10);
  double total = 0.0;
  for (double p : std::get<UserLattice>(w.family()).probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_NEAR(w.tilted_mean(), 0.0, 1e-9);
}

TEST(Criticality, ResidualSignConvention) {
  StepModel super(TwoPoint{0.1}, 2);  // phi(rho) = 2 sqrt(p q) = 0.6 > 1/2
  super.find_rho();
  EXPECT_NEAR(super.criticality_residual(), 0.6 - 0.5, 1e-12);
  StepModel sub(TwoPoint{0.01}, 2);
  sub.find_rho();
  EXPECT_LT(sub.criticality_residual(), 0.0);
}

TEST(Tilt, CenteredAndNormalised) {
  const StepModel tp = calibrate_critical(TwoPoint{}, 2);
  const LatticeLaw t = tp.tilted_lattice_law();
  EXPECT_NEAR(t.mass(-1), 0.5, 1e-12);
  EXPECT_NEAR(t.mass(1), 0.5, 1e-12);
  EXPECT_NEAR(t.mean(), 0.0, 1e-12);
  EXPECT_NEAR(calibrate_critical(Gaussian{0.0, 1.5}, 3).tilted_mean(), 0.0, 1e-9);
}

TEST(Sampler, TwoPointFrequencyAndSupport) {
  const StepModel m = calibrate_critical(TwoPoint{}, 2);
  const StepSampler s = StepSampler::base(m);
  Rng rng(4, 0);
  int ups = 0;
  constexpr int n = 400'000;
  for (int i = 0; i < n; ++i) {
    const double x = s(rng);
    ASSERT_TRUE(x == 1.0 || x == -1.0);
    ups += x > 0;
  }
  const double p = std::get<TwoPoint>(m.family()).p;
  EXPECT_NEAR(static_cast<double>(ups) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Sampler, LatticeFrequencies) {
  const StepModel m(UserLattice{{-3, 0, 2}, {0.2, 0.5, 0.3}}, 2);
  const StepSampler s = StepSampler::base(m);
  Rng rng(5, 0);
  std::map<int, int> counts;
  constexpr int n = 300'000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<int>(s(rng))];
  ASSERT_EQ(counts.size(), 3u);
  EXPECT_NEAR(counts[-3] / double(n), 0.2, 0.005);
  EXPECT_NEAR(counts[0] / double(n), 0.5, 0.005);
  EXPECT_NEAR(counts[2] / double(n), 0.3, 0.005);
}

TEST(Sampler, GaussianMoments) {
  const StepModel m = calibrate_critical(Gaussian{0.0, 2.0}, 2);
  const StepSampler s = StepSampler::base(m);
  Rng rng(6, 0);
  double sum = 0.0, sq = 0.0;
  constexpr int n = 200'000;
  for (int i = 0; i < n; ++i) {
    const double x = s(rng);
    sum += x;
    sq += x * x;
  }
  const double mu = std::get<Gaussian>(m.family()).mu;
  EXPECT_NEAR(sum / n, mu, 3.0 * 2.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 4.0, 0.06);
}

TEST(Sampler, TiltedMeanZeroEmpirically) {
  const StepModel models[] = {calibrate_critical(TwoPoint{}, 3), calibrate_critical(Gaussian{0.0, 1.0}, 2),
                              calibrate_critical(UserLattice{{-2, -1, 1, 2}, {0.3, 0.3, 0.25, 0.15}}, 2)};
  std::uint64_t idx = 0;
  for (const auto& m : models) {
    const StepSampler s = StepSampler::tilted(m);
    Rng rng(8, idx++);
    double sum = 0.0, sq = 0.0;
    constexpr int n = 200'000;
    for (int i = 0; i < n; ++i) {
      const double x = s(rng);
      sum += x;
      sq += x * x;
    }
    const double se = std::sqrt((sq / n - (sum / n) * (sum / n)) / n);
    EXPECT_LT(std::abs(sum / n), 3.0 * se);
  }
}
