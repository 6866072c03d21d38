#include "kbrw/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) fail(ErrorKind::validation, "threshold grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) fail(ErrorKind::validation, "threshold grid must be ascending");
}

MomentReport report_from(const MomentAccumulator& acc, MomentSource source, double factor) {
  MomentReport r;
  r.value = acc.mean() * factor;
  r.std_error = acc.stderr_mean() * factor;
  r.source = source;
  r.reps = acc.count + acc.censored;
  r.censored = acc.censored;
  r.censoring_warning = r.reps > 0 && acc.censored * 100 > r.reps;
  return r;
}

double zak_scale(const StepModel& model, double y, double a, double k) {
  return k / (std::exp(model.rho() * (y - a)) * (1.0 + k - y));
}

double h_scale(const StepModel& model, double x, double k) {
  return k * std::exp(model.rho() * (k - x)) / (1.0 + x);
}

template <class Stat>
MomentReport brw_mean(const StepModel& model, const BrwConfig& config, const TreeMcOptions& opts,
                      Stat stat) {
  if (opts.reps == 0) fail(ErrorKind::validation, "reps must be >= 1");
  config.validate();
  const auto acc = replicate<MomentAccumulator>(opts.reps, opts.schedule, [&] {
    return [sim = BrwSimulator(model, config), &opts, stat](MomentAccumulator& a,
                                                            std::uint64_t rep) mutable {
      Rng rng(opts.seed, rep);
      const BrwRun run = sim(rng);
      if (run.is_censored()) {
        ++a.censored;
        return;
      }
      a.add(static_cast<double>(stat(run)));
    };
  });
  return report_from(acc, MomentSource::direct_mc, 1.0);
}

template <class Value>
MomentReport tilted_walk_mean(const StepModel& model, double start, double lower, double upper,
                              const TreeMcOptions& opts, double factor, Value value) {
  if (opts.reps == 0) fail(ErrorKind::validation, "reps must be >= 1");
  const StepSampler tilted = StepSampler::tilted(model);
  const auto acc = replicate<MomentAccumulator>(opts.reps, opts.schedule, [&] {
    return [&tilted, start, lower, upper, &opts, value](MomentAccumulator& a, std::uint64_t rep) {
      Rng rng(opts.seed, rep);
      const WalkFunctionals w =
          simulate_walk(tilted, start, lower, upper, std::nullopt, rng, opts.max_walk_steps);
      if (w.censored) {
        ++a.censored;
        return;
      }
      a.add(value(w));
    };
  });
  return report_from(acc, MomentSource::many_to_one_is, factor);
}

// Larger root of rho k - ln k = ln(target) on [1/rho, ...].
double solve_level(double rho, double target) {
  if (!(rho > 0.0)) fail(ErrorKind::validation, "level choice: rho must be > 0");
  if (!(target > std::exp(1.0) * rho))
    fail(ErrorKind::domain, "level choice: no root, need n > e * rho");
  const double log_t = std::log(target);
  auto f = [rho, log_t](double k) { return rho * k - std::log(k) - log_t; };
  double lo = 1.0 / rho;
  double hi = (log_t + 2.0 * std::log(std::max(log_t, 1.0))) / rho + 10.0;
  if (!(f(lo) < 0.0 && f(hi) > 0.0)) fail(ErrorKind::domain, "level choice: no root in bracket");
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct StageTwoCounts {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  std::uint64_t excluded = 0;
  void merge(const StageTwoCounts& o) {
    hits += o.hits;
    trials += o.trials;
    excluded += o.excluded;
  }
};

StageEstimate binomial_stage(std::uint64_t hits, std::uint64_t trials, std::uint64_t excluded) {
  StageEstimate s;
  s.reps = trials + excluded;
  s.excluded = excluded;
  if (trials > 0) {
    s.p = static_cast<double>(hits) / static_cast<double>(trials);
    s.std_error = std::sqrt(s.p * (1.0 - s.p) / static_cast<double>(trials));
  }
  return s;
}

}  // namespace

WilsonInterval wilson_ci(std::uint64_t hits, std::uint64_t reps, double z) {
  if (reps == 0) fail(ErrorKind::validation, "wilson_ci: reps must be >= 1");
  if (hits > reps) fail(ErrorKind::validation, "wilson_ci: hits exceed reps");
  const double n = static_cast<double>(reps);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  WilsonInterval ci{std::max(0.0, centre - half), std::min(1.0, centre + half)};
  if (hits == 0) ci.lo = 0.0;
  if (hits == reps) ci.hi = 1.0;
  return ci;
}

void TailCurve::init(TailStat s, std::vector<double> grid) {
  stat = s;
  thresholds = std::move(grid);
  hits.assign(thresholds.size(), 0);
  trials.assign(thresholds.size(), 0);
  excluded.assign(thresholds.size(), 0);
  reps = 0;
  censored_reps = 0;
}

void TailCurve::tally(double value, bool censored) {
  ++reps;
  if (censored) ++censored_reps;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double t = thresholds[i];
    const bool exceeds = stat == TailStat::progeny ? value > t : value >= t;
    if (exceeds) {
      ++hits[i];
      ++trials[i];
    } else if (censored) {
      ++excluded[i];
    } else {
      ++trials[i];
    }
  }
}

void TailCurve::merge(const TailCurve& other) {
  if (other.thresholds.empty()) return;
  if (thresholds.empty()) {
    *this = other;
    return;
  }
  if (thresholds != other.thresholds || stat != other.stat)
    fail(ErrorKind::validation, "tail curve merge: grids differ");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    hits[i] += other.hits[i];
    trials[i] += other.trials[i];
    excluded[i] += other.excluded[i];
  }
  reps += other.reps;
  censored_reps += other.censored_reps;
}

double TailCurve::p_hat(std::size_t i) const {
  if (exact) return exact_p.at(i);
  return trials.at(i) ? static_cast<double>(hits[i]) / static_cast<double>(trials[i]) : 0.0;
}

WilsonInterval TailCurve::ci(std::size_t i, double z) const {
  if (exact) return {exact_p.at(i), exact_p.at(i)};
  if (trials.at(i) == 0) return {0.0, 1.0};
  return wilson_ci(hits[i], trials[i], z);
}

double TailCurve::scale_factor(std::size_t i) const {
  const double t = thresholds.at(i);
  if (stat == TailStat::progeny) {
    if (t <= 0.0) return 0.0;
    const double l = std::log(t);
    return t * l * l / ((1.0 + x) * std::exp(rho * x));
  }
  return t * std::exp(rho * (t - x)) / (1.0 + x);
}

double TailCurve::scaled(std::size_t i) const { return p_hat(i) * scale_factor(i); }

TailCurve tail_curve_Z(const StepModel& model, double x, const std::vector<double>& n_grid,
                       const TreeMcOptions& opts) {
  check_grid(n_grid);
  if (n_grid.back() > static_cast<double>(opts.caps.max_total_counted))
    fail(ErrorKind::validation, "tail-z: largest threshold exceeds max_total_counted");
  if (opts.reps == 0) fail(ErrorKind::validation, "reps must be >= 1");

  BrwConfig config;
  config.x = x;
  config.caps = opts.caps;
  // Z > max(grid) already decides every threshold.
  config.caps.max_total_counted =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(n_grid.back())));
  config.validate();

  TailCurve curve = replicate<TailCurve>(opts.reps, opts.schedule, [&] {
    return [sim = BrwSimulator(model, config), &opts, &n_grid](TailCurve& acc,
                                                               std::uint64_t rep) mutable {
      if (acc.thresholds.empty()) acc.init(TailStat::progeny, n_grid);
      Rng rng(opts.seed, rep);
      const BrwRun run = sim(rng);
      acc.tally(static_cast<double>(run.Z), run.is_censored());
    };
  });
  curve.x = x;
  curve.rho = model.rho();
  return curve;
}

TailCurve tail_curve_M(const StepModel& model, double x, const std::vector<double>& k_grid,
                       const TreeMcOptions& opts) {
  check_grid(k_grid);
  if (opts.reps == 0) fail(ErrorKind::validation, "reps must be >= 1");
  BrwConfig config;
  config.x = x;
  config.caps = opts.caps;
  config.validate();

  TailCurve curve = replicate<TailCurve>(opts.reps, opts.schedule, [&] {
    return [sim = BrwSimulator(model, config), &opts, &k_grid](TailCurve& acc,
                                                               std::uint64_t rep) mutable {
      if (acc.thresholds.empty()) acc.init(TailStat::maximum, k_grid);
      Rng rng(opts.seed, rep);
      const BrwRun run = sim(rng);
      acc.tally(run.M, run.is_censored());
    };
  });
  curve.x = x;
  curve.rho = model.rho();
  return curve;
}

TailCurve tail_curve_M_exact(const StepModel& model, int x, const std::vector<int>& k_grid,
                             std::uint64_t max_sweeps) {
  std::vector<double> grid(k_grid.begin(), k_grid.end());
  check_grid(grid);
  TailCurve curve;
  curve.init(TailStat::maximum, grid);
  curve.exact = true;
  curve.x = x;
  curve.rho = model.rho();
  for (int k : k_grid) {
    if (k < x) fail(ErrorKind::validation, "tail-max exact: thresholds must be >= x");
    curve.exact_p.push_back(exact_strip_survival_solve(model, k, x, 1e-12, max_sweeps).value);
  }
  return curve;
}

MomentReport moment_Zak_direct(const StepModel& model, double y, double a, double k,
                               const TreeMcOptions& opts) {
  BrwConfig config{y, a, k, opts.caps};
  auto r = brw_mean(model, config, opts, [](const BrwRun& run) { return run.Zak; });
  r.scaled = r.value * zak_scale(model, y, a, k);
  return r;
}

MomentReport moment_Zak_many_to_one(const StepModel& model, double y, double a, double k,
                                    const TreeMcOptions& opts) {
  if (!(a <= y && y <= k)) fail(ErrorKind::validation, "many-to-one Z(a,k): need a <= y <= k");
  const double rho = model.rho();
  auto r = tilted_walk_mean(model, y, a, k, opts, std::exp(rho * (y - a)),
                            [rho](const WalkFunctionals& w) {
                              return w.exit == Exit::bottom ? std::exp(rho * *w.undershoot) : 0.0;
                            });
  r.scaled = r.value * zak_scale(model, y, a, k);
  return r;
}

MomentReport moment_Zak_exact(const StepModel& model, int y, int a, int k) {
  MomentReport r;
  r.value = exact_brw_first_moment(model, a, k, y);
  r.source = MomentSource::exact_lattice;
  r.tolerance = 1e-9 * std::abs(r.value);
  r.scaled = r.value * zak_scale(model, y, a, k);
  return r;
}

MomentReport moment_H_direct(const StepModel& model, double x, double k, const TreeMcOptions& opts) {
  BrwConfig config{x, std::nullopt, k, opts.caps};
  auto r = brw_mean(model, config, opts, [](const BrwRun& run) { return run.Hk; });
  r.scaled = r.value * h_scale(model, x, k);
  return r;
}

MomentReport moment_H_many_to_one(const StepModel& model, double x, double k,
                                  const TreeMcOptions& opts) {
  if (!(0.0 <= x && x <= k)) fail(ErrorKind::validation, "many-to-one H(k): need 0 <= x <= k");
  const double rho = model.rho();
  auto r = tilted_walk_mean(model, x, 0.0, k, opts, std::exp(rho * (x - k)),
                            [rho](const WalkFunctionals& w) {
                              return w.exit == Exit::top ? std::exp(-rho * *w.overshoot) : 0.0;
                            });
  r.scaled = r.value * h_scale(model, x, k);
  return r;
}

MomentReport moment_H_exact(const StepModel& model, int x, int k) {
  MomentReport r;
  r.value = exact_brw_first_moment_H(model, k, x);
  r.source = MomentSource::exact_lattice;
  r.tolerance = 1e-9 * std::abs(r.value);
  r.scaled = r.value * h_scale(model, x, k);
  return r;
}

double choose_k_upper(const StepModel& model, double n) { return solve_level(model.rho(), n); }

double choose_k_lower(const StepModel& model, double n, double mu) {
  if (!(mu > 0.0)) fail(ErrorKind::validation, "choose_k_lower: mu must be > 0");
  return solve_level(model.rho(), 2.0 * n / mu);
}

TwoStageResult two_stage_tail(const StepModel& model, double x, double a, double n,
                              const TwoStageOptions& opts) {
  if (!(n >= 1.0)) fail(ErrorKind::validation, "two-stage: n must be >= 1");
  if (!(a >= 0.0)) fail(ErrorKind::validation, "two-stage: a must be >= 0");
  if (opts.reps_stage1 == 0 || opts.reps_stage2 == 0)
    fail(ErrorKind::validation, "two-stage: reps must be >= 1");
  const double rho = model.rho();
  const bool lattice = model.is_lattice();

  TwoStageResult out;

  // Pilot: mu = k e^{-rho k} E^k[Z(a, k)] at the level of the upper-bound equation.
  out.pilot_k = choose_k_upper(model, n);
  if (lattice) out.pilot_k = std::ceil(out.pilot_k);
  if (!(a < out.pilot_k)) fail(ErrorKind::validation, "two-stage: a must lie below the pilot level");
  TreeMcOptions pilot{opts.reps_stage1, stage_key(opts.seed, 1), opts.schedule, opts.caps};
  const MomentReport m = moment_Zak_many_to_one(model, out.pilot_k, a, out.pilot_k, pilot);
  out.mu_hat = out.pilot_k * std::exp(-rho * out.pilot_k) * m.value;
  out.k_star = choose_k_lower(model, n, out.mu_hat);
  if (!(a < out.k_star)) fail(ErrorKind::validation, "two-stage: a must lie below the chosen level");

  // Lattice walks reach levels only at integers; both neighbours of k_star are
  // valid constructions and the larger product is kept.
  std::vector<double> levels;
  if (lattice) {
    for (double lv : {std::floor(out.k_star), std::ceil(out.k_star)})
      if (lv > a && lv >= x && (levels.empty() || levels.back() != lv)) levels.push_back(lv);
    if (levels.empty()) fail(ErrorKind::validation, "two-stage: no admissible lattice level");
  } else {
    levels.push_back(std::max(out.k_star, x));
  }

  bool have = false;
  for (std::size_t c = 0; c < levels.size(); ++c) {
    const double level = levels[c];
    StageEstimate reach;
    if (lattice) {
      reach.p = exact_strip_survival(model, static_cast<int>(level), static_cast<int>(x));
      reach.exact = true;
    } else {
      TreeMcOptions s1{opts.reps_stage1, stage_key(opts.seed, 2), opts.schedule, opts.caps};
      const TailCurve tc = tail_curve_M(model, x, {level}, s1);
      reach = binomial_stage(tc.hits[0], tc.trials[0], tc.excluded[0]);
    }

    BrwConfig cfg{level, a, level, opts.caps};
    cfg.stop_zak_above = static_cast<std::uint64_t>(std::floor(n));
    cfg.validate();
    const std::uint64_t seed2 = stage_key(opts.seed, 3 + c);
    const auto counts = replicate<StageTwoCounts>(opts.reps_stage2, opts.schedule, [&] {
      return [sim = BrwSimulator(model, cfg), seed2, n](StageTwoCounts& acc,
                                                        std::uint64_t rep) mutable {
        Rng rng(seed2, rep);
        const BrwRun run = sim(rng);
        const bool exceeds = static_cast<double>(run.Zak) > n;
        if (exceeds) {
          ++acc.hits;
          ++acc.trials;
        } else if (run.is_censored()) {
          ++acc.excluded;
        } else {
          ++acc.trials;
        }
      };
    });
    const StageEstimate progeny = binomial_stage(counts.hits, counts.trials, counts.excluded);
    const double estimate = reach.p * progeny.p;
    if (!have || estimate > out.estimate) {
      have = true;
      out.level = level;
      out.reach = reach;
      out.progeny = progeny;
      out.estimate = estimate;
    }
  }

  const double rel1 = out.reach.p > 0.0 ? out.reach.std_error / out.reach.p : 0.0;
  const double rel2 = out.progeny.p > 0.0 ? out.progeny.std_error / out.progeny.p : 0.0;
  out.std_error = out.estimate * std::hypot(rel1, rel2);
  out.censoring_warning = out.progeny.excluded * 100 > out.progeny.reps;
  const double widen = out.censoring_warning ? 2.0 : 1.0;
  out.ci = {std::max(0.0, out.estimate - 1.96 * widen * out.std_error),
            std::min(1.0, out.estimate + 1.96 * widen * out.std_error)};
  const double l = std::log(n);
  out.scaled = n * l * l * out.estimate / ((1.0 + x) * std::exp(rho * x));
  return out;
}

double band_ratio(const std::vector<double>& values) {
  if (values.empty()) return kInf;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*lo > 0.0)) return kInf;
  return *hi / *lo;
}

}  // namespace kbrw
