#include "kbrw/acceptance.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>

#include "kbrw/brw_engine.hpp"
#include "kbrw/error.hpp"
#include "kbrw/estimators.hpp"
#include "kbrw/output.hpp"
#include "kbrw/walk_engine.hpp"

namespace kbrw {

namespace {

std::string printf_string(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

// Appends to a detail string with "; " separators.
struct Detail {
  std::string text;
  void add(const std::string& s) {
    if (!text.empty()) text += "; ";
    text += s;
  }
};

struct Context {
  const AcceptanceOptions& opts;
  Schedule schedule() const { return Schedule{opts.workers, 2048}; }
  std::uint64_t seed(std::uint64_t stage) const { return stage_key(opts.seed, stage); }
};

// Base weights for the lattice model; calibration reweights them to criticality.
StepModel lattice_model() {
  return calibrate_critical(UserLattice{{-2, -1, 1, 2}, {0.3, 0.3, 0.25, 0.15}}, 2);
}

StepModel two_point_model(int b = 2) { return calibrate_critical(TwoPoint{}, b); }
StepModel gaussian_model() { return calibrate_critical(Gaussian{0.0, 1.0}, 2); }

// ---------------------------------------------------------------------------

bool calibration(const Context& ctx, Detail& d) {
  const auto& tol = ctx.opts.tol;
  const auto t0 = std::chrono::steady_clock::now();
  const StepModel tp = two_point_model();
  const StepModel ga = gaussian_model();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const double p = std::get<TwoPoint>(tp.family()).p;
  const double mu = std::get<Gaussian>(ga.family()).mu;
  const double p_ref = (2.0 - std::sqrt(3.0)) / 4.0;
  const double rho_tp = std::log(2.0 + std::sqrt(3.0));
  const double g_ref = std::sqrt(2.0 * std::log(2.0));
  const double errs[] = {std::abs(p - p_ref), std::abs(tp.rho() - rho_tp), std::abs(mu + g_ref),
                         std::abs(ga.rho() - g_ref)};
  const double worst = *std::max_element(std::begin(errs), std::end(errs));
  d.add(printf_string("p=%.9f rho=%.9f mu=%.9f rho=%.9f", p, tp.rho(), mu, ga.rho()));
  d.add(printf_string("max err %.2e (tol %.0e)", worst, tol.calibration));
  d.add(printf_string("calibration %.3f s (limit %.0f s)", secs, tol.calibration_seconds));
  return worst <= tol.calibration && secs < tol.calibration_seconds;
}

bool tilt_centering(const Context& ctx, Detail& d) {
  constexpr std::uint64_t draws = 1'000'000;
  const StepModel models[] = {two_point_model(), gaussian_model(), lattice_model()};
  bool ok = true;
  for (std::size_t m = 0; m < std::size(models); ++m) {
    const StepSampler tilted = StepSampler::tilted(models[m]);
    Rng rng(ctx.seed(2), m);
    MomentAccumulator acc;
    for (std::uint64_t i = 0; i < draws; ++i) acc.add(tilted(rng));
    const double z = acc.mean() / acc.stderr_mean();
    const bool pass = std::abs(z) <= ctx.opts.tol.sigmas;
    ok = ok && pass;
    d.add(printf_string("%s mean=%.2e (%.2f se)", family_name(models[m].family()).c_str(),
                        acc.mean(), z));
  }
  return ok;
}

bool gamblers_ruin(const Context& ctx, Detail& d) {
  const StepModel tp = two_point_model();
  const LatticeLaw law = tp.tilted_lattice_law();
  const StepSampler walk = StepSampler::tilted(tp);
  Rng pick(ctx.seed(3), 0);
  double worst_exact = 0.0;
  double worst_sigma = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int k = 1 + static_cast<int>(pick.uniform() * 40.0);
    const int z = static_cast<int>(pick.uniform() * (k + 1));
    const double ref = (z + 1.0) / (k + 2.0);
    const double h = exact_hitting_probability(LatticeStrip(0, k, law), z);
    worst_exact = std::max(worst_exact, std::abs(h - ref));

    McOptions mc;
    mc.reps = 100'000;
    mc.seed = stage_key(ctx.seed(3), 1 + static_cast<std::uint64_t>(i));
    mc.schedule = ctx.schedule();
    const MomentReport r = estimate_hitting_probability(walk, z, 0.0, k, mc);
    const double se = std::sqrt(ref * (1.0 - ref) / static_cast<double>(mc.reps));
    worst_sigma = std::max(worst_sigma, std::abs(r.value - ref) / se);
  }
  d.add(printf_string("max |exact-(z+1)/(k+2)|=%.2e (tol %.0e)", worst_exact, ctx.opts.tol.exact_identity));
  d.add(printf_string("max MC deviation %.2f se (tol %.1f)", worst_sigma, ctx.opts.tol.sigmas));
  return worst_exact <= ctx.opts.tol.exact_identity && worst_sigma <= ctx.opts.tol.sigmas;
}

struct LeafCounts {
  std::uint64_t runs = 0;
  std::uint64_t censored = 0;
  std::uint64_t violations = 0;
  void merge(const LeafCounts& o) {
    runs += o.runs;
    censored += o.censored;
    violations += o.violations;
  }
};

LeafCounts leaf_check(const Context& ctx, const StepModel& model, std::optional<double> top,
                      std::uint64_t stage) {
  const BrwConfig cfg{0.0, std::nullopt, top, BrwCaps{}};
  const std::uint64_t seed = ctx.seed(stage);
  const std::uint64_t b1 = static_cast<std::uint64_t>(model.branching() - 1);
  return replicate<LeafCounts>(10'000, ctx.schedule(), [&] {
    return [sim = BrwSimulator(model, cfg), seed, b1](LeafCounts& acc, std::uint64_t rep) mutable {
      Rng rng(seed, rep);
      const BrwRun run = sim(rng);
      if (run.is_censored()) {
        ++acc.censored;
        return;
      }
      ++acc.runs;
      if (run.Z0 + run.Hk != 1 + b1 * run.Z) ++acc.violations;
    };
  });
}

bool leaf_identity(const Context& ctx, Detail& d) {
  bool ok = true;
  std::uint64_t stage = 40;
  for (int b : {2, 3}) {
    const StepModel model = two_point_model(b);
    for (std::optional<double> top : {std::optional<double>{}, std::optional<double>{10.0}}) {
      const LeafCounts c = leaf_check(ctx, model, top, stage++);
      ok = ok && c.violations == 0 && c.runs == 10'000;
      d.add(printf_string("b=%d %s: %llu/%llu exact, %llu censored", b, top ? "strip" : "free",
                          static_cast<unsigned long long>(c.runs - c.violations),
                          static_cast<unsigned long long>(c.runs),
                          static_cast<unsigned long long>(c.censored)));
    }
  }
  const LeafCounts g = leaf_check(ctx, gaussian_model(), std::nullopt, stage++);
  ok = ok && g.violations == 0 && g.runs == 10'000;
  d.add(printf_string("gaussian b=2: %llu violations", static_cast<unsigned long long>(g.violations)));
  return ok;
}

bool pairwise(const std::vector<MomentReport>& reports, double sigmas, double& worst) {
  bool ok = true;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].censoring_warning) ok = false;
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      const double s = std::hypot(reports[i].spread(), reports[j].spread());
      if (s > 0.0) worst = std::max(worst, std::abs(reports[i].value - reports[j].value) / s);
      ok = ok && agree(reports[i], reports[j], sigmas);
    }
  }
  return ok;
}

bool dual_source(const Context& ctx, Detail& d) {
  const StepModel lat = lattice_model();
  const StepModel ga = gaussian_model();
  const double sig = ctx.opts.tol.sigmas;
  TreeMcOptions mc;
  mc.reps = 100'000;
  mc.schedule = ctx.schedule();
  std::uint64_t stage = 50;
  bool ok = true;
  double worst = 0.0;

  const std::array<std::array<int, 3>, 5> zak{{{4, 0, 4}, {6, 0, 6}, {5, 1, 7}, {3, 0, 8}, {8, 2, 8}}};
  for (const auto& [y, a, k] : zak) {
    mc.seed = ctx.seed(stage++);
    const MomentReport direct = moment_Zak_direct(lat, y, a, k, mc);
    const MomentReport m2o = moment_Zak_many_to_one(lat, y, a, k, mc);
    ok = pairwise({moment_Zak_exact(lat, y, a, k), direct, m2o}, sig, worst) && ok;
  }
  d.add(printf_string("Z(a,k): 5 lattice triples"));

  const std::array<std::array<int, 2>, 5> hk{{{0, 3}, {1, 4}, {2, 5}, {3, 6}, {5, 8}}};
  for (const auto& [x, k] : hk) {
    mc.seed = ctx.seed(stage++);
    const MomentReport direct = moment_H_direct(lat, x, k, mc);
    const MomentReport m2o = moment_H_many_to_one(lat, x, k, mc);
    ok = pairwise({moment_H_exact(lat, x, k), direct, m2o}, sig, worst) && ok;
  }
  d.add("H_k: 5 lattice pairs");

  mc.seed = ctx.seed(stage++);
  ok = pairwise({moment_Zak_direct(ga, 2.0, 0.0, 4.0, mc), moment_Zak_many_to_one(ga, 2.0, 0.0, 4.0, mc)},
                sig, worst) && ok;
  mc.seed = ctx.seed(stage++);
  ok = pairwise({moment_H_direct(ga, 1.0, 4.0, mc), moment_H_many_to_one(ga, 1.0, 4.0, mc)}, sig, worst) &&
       ok;
  d.add("gaussian: one Z(a,k) and one H_k point");
  d.add(printf_string("worst pairwise gap %.2f combined se (tol %.1f)", worst, sig));
  return ok;
}

bool exact_bands(const Context& ctx, Detail& d) {
  const StepModel tp = two_point_model();
  const double rho = tp.rho();
  const int a = 0;
  const int x = 0;
  std::vector<double> m1s, m2s, ms;
  std::uint64_t sweeps = 0;
  for (int k = 8; k <= 30; ++k) {
    const double e = std::exp(-rho * (k - a));
    m1s.push_back(k * e * exact_brw_first_moment(tp, a, k, k));
    m2s.push_back(static_cast<double>(k) * k * e * e * exact_brw_second_moment(tp, a, k, k));
    const SurvivalSolve s = exact_strip_survival_solve(tp, k, x);
    sweeps = std::max(sweeps, s.sweeps);
    ms.push_back(k * std::exp(rho * (k - x)) * s.value / (1.0 + x));
  }
  const double r1 = band_ratio(m1s), r2 = band_ratio(m2s), r3 = band_ratio(ms);
  const double lim = ctx.opts.tol.exact_band;
  d.add(printf_string("k=8..30 ratios: first %.3f, second %.3f, maximum %.3f (limit %.1f)", r1, r2, r3, lim));
  d.add(printf_string("survival sweeps <= %llu", static_cast<unsigned long long>(sweeps)));
  return r1 <= lim && r2 <= lim && r3 <= lim;
}

bool green_bands(const Context& ctx, Detail& d) {
  const std::vector<std::pair<std::string, LatticeLaw>> laws = {
      {"symmetric", two_point_model().tilted_lattice_law()},
      {"lattice", lattice_model().tilted_lattice_law()}};
  const GreenQuantity which[] = {GreenQuantity::zero_to_top, GreenQuantity::near_top_to_top,
                                 GreenQuantity::near_top_to_bottom};
  const double lim = ctx.opts.tol.green_band;
  bool ok = true;
  for (const auto& [name, law] : laws) {
    double worst = 0.0;
    for (GreenQuantity q : which) {
      for (int x : {0, 1, 4}) {
        std::vector<double> v;
        for (int k : {10, 20, 40, 80, 160}) v.push_back(scaled_green_quantity(law, k, x, q));
        worst = std::max(worst, band_ratio(v));
      }
    }
    ok = ok && worst <= lim;
    d.add(printf_string("%s walk worst ratio %.3f", name.c_str(), worst));
  }
  d.add(printf_string("k in {10..160}, x in {0,1,4}, limit %.1f", lim));
  return ok;
}

bool tail_band(const Context& ctx, Detail& d) {
  const auto& tol = ctx.opts.tol;
  const auto t0 = std::chrono::steady_clock::now();
  const StepModel tp = two_point_model();
  TreeMcOptions mc;
  mc.reps = 10'000'000;
  mc.seed = ctx.seed(8);
  mc.schedule = ctx.schedule();
  const std::vector<double> grid = {10.0, 1e2, 1e3, 1e4, 1e5};
  const TailCurve curve = tail_curve_Z(tp, 0.0, grid, mc);

  std::vector<double> band;
  double lo_max = 0.0;
  double hi_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 3; ++i) {
    band.push_back(curve.scaled(i));
    const WilsonInterval ci = curve.ci(i);
    lo_max = std::max(lo_max, ci.lo * curve.scale_factor(i));
    hi_min = std::min(hi_min, ci.hi * curve.scale_factor(i));
  }
  const double ratio = band_ratio(band);
  const bool overlap = lo_max <= tol.tail_band * hi_min;
  d.add(printf_string("direct scaled %.3f %.3f %.3f ratio %.3f (limit %.1f)", band[0], band[1], band[2],
                      ratio, tol.tail_band));
  d.add(printf_string("CI band %.3f..%.3f %s", lo_max, hi_min, overlap ? "overlaps" : "disjoint"));

  TwoStageOptions ts;
  ts.seed = ctx.seed(9);
  ts.schedule = ctx.schedule();
  std::vector<double> scaled;
  bool lower_bound = true;
  for (double n : {1e3, 1e4, 1e5}) {
    const TwoStageResult r = two_stage_tail(tp, 0.0, 1.0, n, ts);
    scaled.push_back(r.scaled);
    const auto it = std::find(grid.begin(), grid.end(), n);
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    if (it != grid.end() && curve.hits[i] > 0) {
      const double cap = curve.ci(i, tol.sigmas).hi;
      if (r.estimate > cap) lower_bound = false;
      d.add(printf_string("n=%g two-stage %.3e vs direct %.3e (hi %.3e)", n, r.estimate, curve.p_hat(i), cap));
    }
  }
  const double ts_ratio = band_ratio(scaled);
  d.add(printf_string("two-stage scaled %.3f %.3f %.3f ratio %.3f (limit %.1f)", scaled[0], scaled[1],
                      scaled[2], ts_ratio, tol.two_stage_band));
  const double mins = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  return ratio <= tol.tail_band && overlap && ts_ratio <= tol.two_stage_band && lower_bound &&
         mins < tol.tail_minutes;
}

std::string determinism_artifact(const Context& ctx, int workers) {
  const StepModel tp = two_point_model();
  const StepModel lat = lattice_model();
  const Schedule sched{workers, 2048};
  const nlohmann::json cfg = {{"check", "determinism"}, {"seed", ctx.opts.seed}};

  TreeMcOptions mc;
  mc.reps = 200'000;
  mc.seed = ctx.seed(90);
  mc.schedule = sched;
  std::string out = tail_curve_csv(tail_curve_Z(tp, 0.0, {10.0, 100.0, 1000.0}, mc), cfg);
  out += tail_curve_csv(tail_curve_M(lat, 0.0, {2.0, 4.0, 6.0}, mc), cfg);
  out += to_json(moment_Zak_many_to_one(gaussian_model(), 2.0, 0.0, 4.0, mc)).dump() + "\n";
  out += to_json(moment_H_direct(lat, 2.0, 5.0, mc)).dump() + "\n";

  const std::uint64_t seed = ctx.seed(91);
  const BrwConfig bc{0.0, 1.0, 12.0, BrwCaps{}};
  const auto runs = replicate_collect<BrwRun>(5'000, sched, [&] {
    return [sim = BrwSimulator(lat, bc), seed](std::uint64_t rep) mutable {
      Rng rng(seed, rep);
      return sim(rng);
    };
  });
  out += brw_runs_csv(runs, cfg);

  TwoStageOptions ts;
  ts.reps_stage1 = 20'000;
  ts.reps_stage2 = 500;
  ts.seed = ctx.seed(92);
  ts.schedule = sched;
  out += to_json(two_stage_tail(tp, 0.0, 1.0, 1000.0, ts)).dump() + "\n";
  return out;
}

bool determinism(const Context& ctx, Detail& d) {
  const std::string one = determinism_artifact(ctx, 1);
  const std::string eight = determinism_artifact(ctx, 8);
  const std::string again = determinism_artifact(ctx, 8);
  const bool same = one == eight && eight == again;
  d.add(printf_string("%zu bytes, workers 1 vs 8 %s, rerun %s", one.size(),
                      one == eight ? "identical" : "DIFFER", eight == again ? "identical" : "DIFFER"));
  return same;
}

struct Criterion {
  int id;
  const char* title;
  bool (*run)(const Context&, Detail&);
};

constexpr Criterion kCriteria[] = {
    {1, "calibration exactness", calibration},
    {2, "tilt centering", tilt_centering},
    {3, "gambler's ruin oracle", gamblers_ruin},
    {4, "leaf identity", leaf_identity},
    {5, "dual-source first moments", dual_source},
    {6, "exact moment and maximum bands", exact_bands},
    {7, "green-sum bands", green_bands},
    {8, "progeny tail band", tail_band},
    {9, "determinism across workers", determinism},
};

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, std::ostream& log) {
  const Context ctx{opts};
  std::vector<CriterionResult> results;
  for (const Criterion& c : kCriteria) {
    if (!opts.only.empty() && !opts.only.count(c.id)) continue;
    CriterionResult r;
    r.id = c.id;
    r.title = c.title;
    Detail d;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      r.passed = c.run(ctx, d);
    } catch (const std::exception& e) {
      r.passed = false;
      d.add(std::string("error: ") + e.what());
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.detail = d.text;
    log << (r.passed ? "PASS" : "FAIL") << " criterion " << r.id << " " << r.title << " ("
        << printf_string("%.1f s", r.seconds) << "): " << r.detail << std::endl;
    results.push_back(std::move(r));
  }
  return results;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.passed; });
}

}  // namespace kbrw
