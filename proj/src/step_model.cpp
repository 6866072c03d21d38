#include "kbrw/step_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

void validate(const StepFamily& family, int branching) {
  if (branching < 2) fail(ErrorKind::validation, "branching factor b must be >= 2");
  std::visit(
      Overloaded{
          [](const TwoPoint& f) {
            if (!(f.p > 0.0 && f.p < 1.0))
              fail(ErrorKind::validation, "two_point: p must lie in (0, 1)");
          },
          [](const Gaussian& f) {
            if (!std::isfinite(f.mu)) fail(ErrorKind::validation, "gaussian: mu must be finite");
            if (!(f.sigma > 0.0 && std::isfinite(f.sigma)))
              fail(ErrorKind::validation, "gaussian: sigma must be > 0");
          },
          [](const UserLattice& f) {
            if (f.support.empty() || f.support.size() != f.probs.size())
              fail(ErrorKind::validation, "user_lattice: support and probs must be non-empty and equal length");
            if (std::set<int>(f.support.begin(), f.support.end()).size() != f.support.size())
              fail(ErrorKind::validation, "user_lattice: duplicate support points");
            double total = 0.0;
            bool has_pos = false;
            bool has_neg = false;
            for (std::size_t i = 0; i < f.support.size(); ++i) {
              if (!(f.probs[i] >= 0.0)) fail(ErrorKind::validation, "user_lattice: negative probability");
              total += f.probs[i];
              if (f.probs[i] > 0.0 && f.support[i] > 0) has_pos = true;
              if (f.probs[i] > 0.0 && f.support[i] < 0) has_neg = true;
            }
            if (std::abs(total - 1.0) > 1e-12)
              fail(ErrorKind::validation, "user_lattice: probabilities must sum to 1 within 1e-12");
            if (!has_pos || !has_neg)
              fail(ErrorKind::validation, "user_lattice: support needs a positive and a negative point");
          },
      },
      family);
}

LatticeLaw to_dense(const UserLattice& f) {
  const auto [lo, hi] = std::minmax_element(f.support.begin(), f.support.end());
  LatticeLaw law{*lo, std::vector<double>(static_cast<std::size_t>(*hi - *lo + 1), 0.0)};
  for (std::size_t i = 0; i < f.support.size(); ++i)
    law.probs[static_cast<std::size_t>(f.support[i] - *lo)] = f.probs[i];
  return law;
}

// log sum_i w_i exp(t y_i), stable for large |t|.
double log_laplace(const LatticeLaw& law, double t) {
  double peak = -kInf;
  for (std::size_t i = 0; i < law.probs.size(); ++i)
    if (law.probs[i] > 0.0)
      peak = std::max(peak, t * (law.min_offset + static_cast<int>(i)));
  double acc = 0.0;
  for (std::size_t i = 0; i < law.probs.size(); ++i)
    if (law.probs[i] > 0.0)
      acc += law.probs[i] * std::exp(t * (law.min_offset + static_cast<int>(i)) - peak);
  return peak + std::log(acc);
}

// Derivative of log phi, i.e. the mean of the law tilted by t.
double tilted_mean_at(const LatticeLaw& law, double t) {
  const double log_phi = log_laplace(law, t);
  double mean = 0.0;
  for (std::size_t i = 0; i < law.probs.size(); ++i) {
    if (law.probs[i] <= 0.0) continue;
    const int y = law.min_offset + static_cast<int>(i);
    mean += y * law.probs[i] * std::exp(t * y - log_phi);
  }
  return mean;
}

}  // namespace

std::string family_name(const StepFamily& family) {
  return std::visit(Overloaded{[](const TwoPoint&) { return std::string("two_point"); },
                               [](const Gaussian&) { return std::string("gaussian"); },
                               [](const UserLattice&) { return std::string("user_lattice"); }},
                    family);
}

double LatticeLaw::mass(int offset) const {
  if (offset < min_offset || offset > max_offset()) return 0.0;
  return probs[static_cast<std::size_t>(offset - min_offset)];
}

double LatticeLaw::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) m += (min_offset + static_cast<int>(i)) * probs[i];
  return m;
}

StepModel::StepModel(StepFamily family, int branching)
    : family_(std::move(family)), branching_(branching) {
  validate(family_, branching_);
}

bool StepModel::is_lattice() const { return !std::holds_alternative<Gaussian>(family_); }

Interval StepModel::laplace_domain() const {
  // All supported families have exponential moments of every order.
  return {-kInf, kInf};
}

double StepModel::laplace(double t) const {
  if (!laplace_domain().contains(t)) fail(ErrorKind::domain, "laplace: t outside the domain of phi");
  return std::visit(
      Overloaded{
          [t](const TwoPoint& f) { return f.p * std::exp(t) + (1.0 - f.p) * std::exp(-t); },
          [t](const Gaussian& f) { return std::exp(f.mu * t + 0.5 * f.sigma * f.sigma * t * t); },
          [t](const UserLattice& f) {
            double acc = 0.0;
            for (std::size_t i = 0; i < f.support.size(); ++i) acc += f.probs[i] * std::exp(t * f.support[i]);
            return acc;
          },
      },
      family_);
}

double StepModel::laplace_derivative(double t) const {
  if (!laplace_domain().contains(t)) fail(ErrorKind::domain, "laplace: t outside the domain of phi");
  return std::visit(
      Overloaded{
          [t](const TwoPoint& f) { return f.p * std::exp(t) - (1.0 - f.p) * std::exp(-t); },
          [t](const Gaussian& f) {
            return (f.mu + f.sigma * f.sigma * t) * std::exp(f.mu * t + 0.5 * f.sigma * f.sigma * t * t);
          },
          [t](const UserLattice& f) {
            double acc = 0.0;
            for (std::size_t i = 0; i < f.support.size(); ++i)
              acc += f.support[i] * f.probs[i] * std::exp(t * f.support[i]);
            return acc;
          },
      },
      family_);
}

double StepModel::find_rho(double tol) {
  if (!(tol > 0.0)) fail(ErrorKind::validation, "find_rho: tol must be > 0");
  if (laplace_derivative(0.0) >= 0.0)
    fail(ErrorKind::domain, "infimum not interior: phi'(0) >= 0, so the minimizer is not at t > 0");

  // Doubling search for a point with phi' > 0.
  double lo = 0.0;
  double hi = 1e-8;
  for (;;) {
    const double d = laplace_derivative(hi);
    if (!std::isfinite(d) || !std::isfinite(laplace(hi)) || hi > 1e6)
      fail(ErrorKind::domain, "infimum not interior: no sign change of phi' before the domain edge");
    if (d > 0.0) break;
    lo = hi;
    hi *= 2.0;
  }

  // Bisect to the end of the bracket; tol only certifies the result.
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 2000; ++iter) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double d = laplace_derivative(mid);
    if (d == 0.0) break;
    (d < 0.0 ? lo : hi) = mid;
  }
  if (!(std::abs(laplace_derivative(mid)) <= tol * std::max(1.0, laplace(mid))))
    fail(ErrorKind::convergence, "find_rho: |phi'(rho)| above tolerance");
  rho_ = mid;
  phi_at_rho_ = laplace(mid);
  return mid;
}

double StepModel::rho() const {
  if (!rho_) fail(ErrorKind::validation, "rho requested before find_rho()");
  return *rho_;
}

double StepModel::phi_at_rho() const {
  if (!rho_) fail(ErrorKind::validation, "phi(rho) requested before find_rho()");
  return phi_at_rho_;
}

double StepModel::criticality_residual() const {
  return phi_at_rho() - 1.0 / static_cast<double>(branching_);
}

LatticeLaw StepModel::lattice_law() const {
  return std::visit(
      Overloaded{
          [](const TwoPoint& f) { return LatticeLaw{-1, {1.0 - f.p, 0.0, f.p}}; },
          [](const Gaussian&) -> LatticeLaw {
            fail(ErrorKind::validation, "gaussian steps have no lattice law");
          },
          [](const UserLattice& f) { return to_dense(f); },
      },
      family_);
}

LatticeLaw StepModel::tilted_lattice_law() const {
  LatticeLaw law = lattice_law();
  const double r = rho();
  const double phi = phi_at_rho();
  for (std::size_t i = 0; i < law.probs.size(); ++i)
    law.probs[i] *= std::exp(r * (law.min_offset + static_cast<int>(i))) / phi;
  return law;
}

double StepModel::tilted_mean() const {
  if (const auto* g = std::get_if<Gaussian>(&family_)) return g->mu + g->sigma * g->sigma * rho();
  return tilted_lattice_law().mean();
}

StepModel calibrate_critical(const StepFamily& fixed, int branching) {
  if (branching < 2) fail(ErrorKind::validation, "calibrate: b must be >= 2");
  const double b = static_cast<double>(branching);

  StepFamily family = std::visit(
      Overloaded{
          [b](const TwoPoint&) -> StepFamily {
            // p = (1 - sqrt(1 - 1/b^2)) / 2, written without cancellation.
            const double x = 1.0 / (b * b);
            return TwoPoint{x / (2.0 * (1.0 + std::sqrt(1.0 - x)))};
          },
          [b](const Gaussian& f) -> StepFamily {
            if (!(f.sigma > 0.0)) fail(ErrorKind::validation, "calibrate: gaussian sigma must be > 0");
            return Gaussian{-f.sigma * std::sqrt(2.0 * std::log(b)), f.sigma};
          },
          [b, branching](const UserLattice& f) -> StepFamily {
            validate(f, branching);
            const LatticeLaw base = to_dense(f);

            // Global minimizer of log phi_w: root of the increasing tilted mean.
            double lo = -1.0;
            double hi = 1.0;
            while (tilted_mean_at(base, lo) > 0.0) lo *= 2.0;
            while (tilted_mean_at(base, hi) < 0.0) hi *= 2.0;
            for (int i = 0; i < 200; ++i) {
              const double mid = 0.5 * (lo + hi);
              (tilted_mean_at(base, mid) < 0.0 ? lo : hi) = mid;
            }
            const double rho0 = 0.5 * (lo + hi);
            const double target = log_laplace(base, rho0) + std::log(b);

            // Reweight by theta < rho0 with log phi_w(theta) = log phi_w(rho0) + log b;
            // the reweighted law then has rho = rho0 - theta > 0 and phi(rho) = 1/b.
            double t_hi = rho0;
            double t_lo = rho0 - 1.0;
            while (log_laplace(base, t_lo) < target) t_lo = rho0 - 2.0 * (rho0 - t_lo);
            for (int i = 0; i < 200; ++i) {
              const double mid = 0.5 * (t_lo + t_hi);
              (log_laplace(base, mid) > target ? t_lo : t_hi) = mid;
            }
            const double theta = 0.5 * (t_lo + t_hi);
            const double log_norm = log_laplace(base, theta);

            UserLattice out{f.support, std::vector<double>(f.support.size())};
            double total = 0.0;
            for (std::size_t i = 0; i < f.support.size(); ++i) {
              out.probs[i] = f.probs[i] * std::exp(theta * f.support[i] - log_norm);
              total += out.probs[i];
            }
            for (double& q : out.probs) q /= total;
            return out;
          },
      },
      fixed);

  StepModel model(std::move(family), branching);
  model.find_rho();
  if (std::abs(model.criticality_residual()) > 1e-10)
    fail(ErrorKind::convergence, "calibrate: residual phi(rho) - 1/b exceeds 1e-10");
  return model;
}

StepSampler StepSampler::from_law(const LatticeLaw& law) {
  StepSampler s;
  s.kind_ = Kind::lattice;
  s.min_offset_ = law.min_offset;
  s.cdf_.resize(law.probs.size());
  std::partial_sum(law.probs.begin(), law.probs.end(), s.cdf_.begin());
  return s;
}

int StepSampler::draw_lattice(double u) const {
  const std::size_t last = cdf_.size() - 1;
  std::size_t i = 0;
  while (i < last && u >= cdf_[i]) ++i;
  return min_offset_ + static_cast<int>(i);
}

StepSampler StepSampler::base(const StepModel& model) {
  const auto& family = model.family();
  if (const auto* f = std::get_if<TwoPoint>(&family)) {
    StepSampler s;
    s.kind_ = Kind::two_point;
    s.up_prob_ = f->p;
    return s;
  }
  if (const auto* g = std::get_if<Gaussian>(&family)) {
    StepSampler s;
    s.kind_ = Kind::gaussian;
    s.mean_ = g->mu;
    s.sd_ = g->sigma;
    return s;
  }
  return from_law(model.lattice_law());
}

StepSampler StepSampler::tilted(const StepModel& model) {
  const auto& family = model.family();
  if (const auto* f = std::get_if<TwoPoint>(&family)) {
    StepSampler s;
    s.kind_ = Kind::two_point;
    s.up_prob_ = f->p * std::exp(model.rho()) / model.phi_at_rho();
    return s;
  }
  if (const auto* g = std::get_if<Gaussian>(&family)) {
    StepSampler s;
    s.kind_ = Kind::gaussian;
    s.mean_ = g->mu + g->sigma * g->sigma * model.rho();
    s.sd_ = g->sigma;
    return s;
  }
  return from_law(model.tilted_lattice_law());
}

double sample_step(const StepModel& model, Rng& rng) { return StepSampler::base(model)(rng); }

double sample_tilted_step(const StepModel& model, Rng& rng) {
  return StepSampler::tilted(model)(rng);
}

}  // namespace kbrw
