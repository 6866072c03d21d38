#include "kbrw/brw_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_lattice(const StepModel& model, const char* what) {
  if (!model.is_lattice()) fail(ErrorKind::validation, std::string(what) + ": lattice model required");
}

// sum_{s : y + s outside [lo, hi] on `side`} p(s), times `scale`.
std::vector<double> boundary_rhs(const LatticeStrip& strip, Side side, double scale) {
  auto r = exit_flux(strip, side, [](int) { return 1.0; });
  for (double& v : r) v *= scale;
  return r;
}

std::vector<double> first_moment_profile(const StepModel& model, int a, int k, double rate) {
  require_lattice(model, "exact first moment");
  if (a < 0 || a > k) fail(ErrorKind::validation, "exact first moment: need 0 <= a <= k");
  const double b = model.branching();
  const LatticeStrip strip(a, k, model.lattice_law());
  const StripSolver solver(strip, b, rate);
  return solver.solve(boundary_rhs(strip, Side::bottom, b));
}

}  // namespace

void BrwConfig::validate() const {
  if (stop_zak_above && !count_level) fail(ErrorKind::validation, "brw: Zak stop needs a level a");
  if (!(x >= 0.0) || !std::isfinite(x)) fail(ErrorKind::validation, "brw: start x must be >= 0");
  if (count_level && !(*count_level >= 0.0)) fail(ErrorKind::validation, "brw: level a must be >= 0");
  if (top_level) {
    if (!(*top_level > 0.0)) fail(ErrorKind::validation, "brw: level k must be > 0");
    if (x > *top_level) fail(ErrorKind::validation, "brw: start x must not exceed k");
    if (count_level && !(*count_level < *top_level))
      fail(ErrorKind::validation, "brw: need a < k");
  }
  if (caps.max_generations == 0 || caps.max_population == 0 || caps.max_total_counted == 0)
    fail(ErrorKind::validation, "brw: caps must be positive");
}

const char* to_string(CapKind kind) {
  switch (kind) {
    case CapKind::none: return "none";
    case CapKind::generations: return "generations";
    case CapKind::population: return "population";
    case CapKind::total_counted: return "total_counted";
  }
  return "unknown";
}

BrwSimulator::BrwSimulator(const StepModel& model, BrwConfig config)
    : steps_(StepSampler::base(model)), branching_(model.branching()), config_(config) {
  config_.validate();
}

BrwRun BrwSimulator::operator()(Rng& rng) {
  const bool counting = config_.count_level.has_value();
  const double a = counting ? *config_.count_level : -kInf;
  const double k = config_.top_level.value_or(kInf);
  const BrwCaps& caps = config_.caps;

  BrwRun run;
  run.Z = 1;
  run.M = config_.x;
  positions_.assign(1, config_.x);
  const bool root_in_band = config_.x >= a;
  in_band_.assign(1, root_in_band ? 1 : 0);
  if (counting && !root_in_band) run.Zak = 1;

  std::uint64_t generation = 0;
  while (!positions_.empty()) {
    if (generation >= caps.max_generations) {
      run.censored = CapKind::generations;
      break;
    }
    next_positions_.clear();
    next_in_band_.clear();
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      const double parent = positions_[i];
      const bool band = in_band_[i] != 0;
      for (int c = 0; c < branching_; ++c) {
        const double y = parent + steps_(rng);
        if (y < 0.0) {
          ++run.Z0;
          if (counting && band) ++run.Zak;
          continue;
        }
        if (y > k) {
          ++run.Hk;
          continue;
        }
        ++run.Z;
        run.M = std::max(run.M, y);
        bool child_band = band;
        if (band && y < a) {
          ++run.Zak;
          child_band = false;
        }
        next_positions_.push_back(y);
        next_in_band_.push_back(child_band ? 1 : 0);
      }
      if (next_positions_.size() > caps.max_population) break;
    }
    ++generation;
    positions_.swap(next_positions_);
    in_band_.swap(next_in_band_);
    if (positions_.size() > caps.max_population) {
      run.censored = CapKind::population;
      break;
    }
    if (run.Z > caps.max_total_counted) {
      run.censored = CapKind::total_counted;
      break;
    }
    if (config_.stop_zak_above && run.Zak > *config_.stop_zak_above) {
      run.stopped = true;
      break;
    }
  }
  run.T_ext = generation;
  return run;
}

BrwRun run_brw(const StepModel& model, const BrwConfig& config, Rng& rng) {
  BrwSimulator sim(model, config);
  return sim(rng);
}

BrwRun run_brw_from_top(const StepModel& model, double a, double k, const BrwCaps& caps, Rng& rng) {
  if (!(a < k)) fail(ErrorKind::validation, "brw from top: need a < k");
  return run_brw(model, BrwConfig{k, a, k, caps}, rng);
}

std::vector<double> exact_brw_first_moment_profile(const StepModel& model, int a, int k) {
  return first_moment_profile(model, a, k, model.rho());
}

std::vector<double> exact_brw_first_moment_profile_unscaled(const StepModel& model, int a, int k) {
  return first_moment_profile(model, a, k, 0.0);
}

double exact_brw_first_moment(const StepModel& model, int a, int k, int y) {
  if (y < a) return 1.0;
  if (y > k) return 0.0;
  return exact_brw_first_moment_profile(model, a, k)[static_cast<std::size_t>(y - a)];
}

std::vector<double> exact_brw_second_moment_profile(const StepModel& model, int a, int k) {
  const auto m1 = exact_brw_first_moment_profile(model, a, k);
  const double b = model.branching();
  const LatticeStrip strip(a, k, model.lattice_law());
  const StripSolver solver(strip, b, model.rho());

  auto rhs = boundary_rhs(strip, Side::bottom, b);
  const LatticeLaw& law = strip.law;
  for (int y = a; y <= k; ++y) {
    double e1 = 0.0;
    for (std::size_t s = 0; s < law.probs.size(); ++s) {
      const int z = y + law.min_offset + static_cast<int>(s);
      const double m = z < a ? 1.0 : (z > k ? 0.0 : m1[static_cast<std::size_t>(z - a)]);
      e1 += law.probs[s] * m;
    }
    rhs[static_cast<std::size_t>(y - a)] += b * (b - 1.0) * e1 * e1;
  }
  return solver.solve(rhs);
}

double exact_brw_second_moment(const StepModel& model, int a, int k, int y) {
  if (y < a) return 1.0;
  if (y > k) return 0.0;
  return exact_brw_second_moment_profile(model, a, k)[static_cast<std::size_t>(y - a)];
}

double exact_brw_first_moment_H(const StepModel& model, int k, int x) {
  require_lattice(model, "exact H moment");
  if (x < 0 || x > k) fail(ErrorKind::validation, "exact H moment: need 0 <= x <= k");
  const double b = model.branching();
  const LatticeStrip strip(0, k, model.lattice_law());
  const StripSolver solver(strip, b, model.rho());
  return solver.solve(boundary_rhs(strip, Side::top, b))[static_cast<std::size_t>(x)];
}

SurvivalSolve exact_strip_survival_solve(const StepModel& model, int k, int x, double tol,
                                         std::uint64_t max_sweeps) {
  require_lattice(model, "strip survival");
  if (x < 0 || x > k) fail(ErrorKind::validation, "strip survival: need 0 <= x <= k");
  if (x == k) return {1.0, 0};
  // Absorbing set is [k, oo) so that reaching k counts as M >= k; states 0..k-1.
  const LatticeStrip strip(0, k - 1, model.lattice_law());
  const LatticeLaw& law = strip.law;
  const double b = model.branching();
  const auto n = static_cast<std::size_t>(strip.size());

  std::vector<double> u(n, 0.0);
  std::vector<double> next(n, 0.0);
  for (std::uint64_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    double worst = 0.0;
    bool all_positive = true;
    for (int y = 0; y < k; ++y) {
      double v = 0.0;
      for (std::size_t s = 0; s < law.probs.size(); ++s) {
        const int z = y + law.min_offset + static_cast<int>(s);
        const double uz = z < 0 ? 0.0 : (z >= k ? 1.0 : u[static_cast<std::size_t>(z)]);
        v += law.probs[s] * uz;
      }
      const double un = v >= 1.0 ? 1.0 : -std::expm1(b * std::log1p(-v));
      const auto i = static_cast<std::size_t>(y);
      if (un > 0.0)
        worst = std::max(worst, std::abs(un - u[i]) / un);
      else
        all_positive = false;
      next[i] = un;
    }
    u.swap(next);
    if (all_positive && worst <= tol) return {u[static_cast<std::size_t>(x)], sweep};
  }
  fail(ErrorKind::convergence, "strip survival: fixed-point iteration did not converge");
}

double exact_strip_survival(const StepModel& model, int k, int x) {
  return exact_strip_survival_solve(model, k, x).value;
}

}  // namespace kbrw
