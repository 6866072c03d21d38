#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kbrw/rng.hpp"

namespace kbrw {

/// X = +1 with probability p, -1 otherwise.
struct TwoPoint {
  double p = 0.5;
};

/// X ~ N(mu, sigma^2).
struct Gaussian {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Finitely supported law on the integers.
struct UserLattice {
  std::vector<int> support;
  std::vector<double> probs;
};

using StepFamily = std::variant<TwoPoint, Gaussian, UserLattice>;

std::string family_name(const StepFamily& family);

/// Dense integer law: probs[i] is the mass of offset min_offset + i.
struct LatticeLaw {
  int min_offset = 0;
  std::vector<double> probs;

  int max_offset() const { return min_offset + static_cast<int>(probs.size()) - 1; }
  double mass(int offset) const;
  double mean() const;
};

struct Interval {
  double lo;
  double hi;

  bool contains(double t) const { return t > lo && t < hi; }
};

/// A step law together with the branching factor b. The tilt point rho
/// (the minimizer of the Laplace transform) is computed lazily by find_rho()
/// and cached; after that the model is treated as immutable and can be
/// shared across threads.
class StepModel {
 public:
  StepModel(StepFamily family, int branching);

  const StepFamily& family() const { return family_; }
  int branching() const { return branching_; }
  bool is_lattice() const;

  /// phi(t) = E[exp(tX)]; throws ErrorKind::domain outside laplace_domain().
  double laplace(double t) const;
  double laplace_derivative(double t) const;
  Interval laplace_domain() const;

  /// Locates rho by bracketing the sign change of phi' and bisecting down to
  /// double precision; convergence error if |phi'(rho)| > tol max(1, phi(rho)).
  /// Caches rho and phi(rho).
  double find_rho(double tol = 1e-12);

  bool has_rho() const { return rho_.has_value(); }
  double rho() const;
  double phi_at_rho() const;

  /// phi(rho) - 1/b. Positive: supercritical (survival with positive
  /// probability); negative: subcritical; zero: critical.
  double criticality_residual() const;

  /// Integer law of X; only for lattice families.
  LatticeLaw lattice_law() const;
  /// Law of X under the tilted measure, y -> p(y) e^{rho y} / phi(rho).
  LatticeLaw tilted_lattice_law() const;

  /// Mean of the step under the tilted measure (exact).
  double tilted_mean() const;

 private:
  StepFamily family_;
  int branching_;
  std::optional<double> rho_;
  double phi_at_rho_ = 0.0;
};

/// Critical model: phi(rho) = 1/b. The free parameter is p for TwoPoint,
/// mu for Gaussian (sigma fixed), and for UserLattice an exponential
/// reweighting p(y) ~ w(y) e^{theta y} of the given base weights w,
/// solved numerically.
StepModel calibrate_critical(const StepFamily& fixed, int branching);

/// Draws steps from the base law or the tilted law of a model. Built once per
/// worker and reused; holds no RNG state of its own.
class StepSampler {
 public:
  static StepSampler base(const StepModel& model);
  static StepSampler tilted(const StepModel& model);

  double operator()(Rng& rng) const {
    switch (kind_) {
      case Kind::two_point: return rng.uniform() < up_prob_ ? 1.0 : -1.0;
      case Kind::gaussian: return mean_ + sd_ * rng.normal();
      case Kind::lattice: return static_cast<double>(draw_lattice(rng.uniform()));
    }
    return 0.0;
  }

  bool is_lattice() const { return kind_ != Kind::gaussian; }

 private:
  enum class Kind { two_point, gaussian, lattice };

  static StepSampler from_law(const LatticeLaw& law);
  int draw_lattice(double u) const;

  Kind kind_ = Kind::two_point;
  double up_prob_ = 0.5;
  double mean_ = 0.0;
  double sd_ = 1.0;
  int min_offset_ = 0;
  std::vector<double> cdf_;
};

double sample_step(const StepModel& model, Rng& rng);
double sample_tilted_step(const StepModel& model, Rng& rng);

}  // namespace kbrw
