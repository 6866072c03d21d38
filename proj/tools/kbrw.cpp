// kbrw: command-line front end for the critical killed branching random walk.
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kbrw/acceptance.hpp"
#include "kbrw/brw_engine.hpp"
#include "kbrw/error.hpp"
#include "kbrw/estimators.hpp"
#include "kbrw/model_io.hpp"
#include "kbrw/output.hpp"
#include "kbrw/walk_engine.hpp"

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

struct Common {
  std::string model_path;
  std::uint64_t seed = 0;
  std::string out;
  std::string summary;
};

void add_common(CLI::App* cmd, Common& c, bool needs_model = true) {
  auto* opt = cmd->add_option("--model", c.model_path, "model JSON file {family, params, b}");
  if (needs_model) opt->required();
  cmd->add_option("--seed", c.seed, "64-bit master seed");
  cmd->add_option("--out", c.out, "output file (default stdout)");
  cmd->add_option("--summary", c.summary, "JSON summary file");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) kbrw::fail(kbrw::ErrorKind::resource, "cannot open output file " + path);
  f << text;
  if (!f) kbrw::fail(kbrw::ErrorKind::resource, "cannot write output file " + path);
}

// Config blob whose hash tags every artifact of a run.
json make_config(const std::string& command, const json& model, std::uint64_t seed, const json& params) {
  return {{"schema_version", kbrw::kConfigSchemaVersion},
          {"command", command},
          {"model", model},
          {"seed", seed},
          {"params", params}};
}

json stamp(json j, const json& config) {
  j["version"] = kbrw::kVersion;
  j["config_hash"] = kbrw::hex64(kbrw::config_hash(config));
  return j;
}

void write_summary(const Common& c, const json& config, const kbrw::StepModel* model,
                   Clock::time_point t0, json extra = json::object()) {
  if (c.summary.empty()) return;
  json s = {{"model", config.at("model")},
            {"rho", model ? json(model->rho()) : json(nullptr)},
            {"seed", c.seed},
            {"runtime", std::chrono::duration<double>(Clock::now() - t0).count()},
            {"command", config.at("command")},
            {"workers", kbrw::workers_from_env()}};
  for (auto& [k, v] : extra.items()) s[k] = v;
  write_text(c.summary, stamp(s, config).dump(2) + "\n");
}

kbrw::Schedule schedule() { return kbrw::Schedule{kbrw::workers_from_env(), 2048}; }

void warn_censoring(const std::string& what) {
  std::cerr << json{{"warning", {{"kind", "censoring"}, {"message", what}}}}.dump() << "\n";
}

struct CapsFlags {
  std::uint64_t max_generations = kbrw::BrwCaps{}.max_generations;
  std::uint64_t max_population = kbrw::BrwCaps{}.max_population;
  std::uint64_t max_total = kbrw::BrwCaps{}.max_total_counted;
  kbrw::BrwCaps caps() const { return {max_generations, max_population, max_total}; }
  json to_json() const {
    return {{"max_generations", max_generations}, {"max_population", max_population},
            {"max_total_counted", max_total}};
  }
};

void add_caps(CLI::App* cmd, CapsFlags& f) {
  cmd->add_option("--max-generations", f.max_generations, "generation cap");
  cmd->add_option("--max-population", f.max_population, "population cap");
  cmd->add_option("--max-total", f.max_total, "cap on counted vertices");
}

bool tail_excess_exclusion(const kbrw::TailCurve& c) {
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c.excluded[i] * 100 > c.reps) return true;
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical killed branching random walk: calibration, simulation and tail estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kbrw::kVersion));

  int exit_status = 0;
  Common c;
  CapsFlags caps;
  const auto t0 = Clock::now();

  // calibrate
  std::string family = "two_point";
  int b = 2;
  double sigma = 1.0;
  std::vector<int> support;
  std::vector<double> weights;
  auto* calibrate = app.add_subcommand("calibrate", "critical parameter and rho for a family");
  calibrate->add_option("--model", c.model_path, "model JSON (probs act as base weights)");
  calibrate->add_option("--family", family, "two_point | gaussian | user_lattice");
  calibrate->add_option("--b", b, "branching factor");
  calibrate->add_option("--sigma", sigma, "gaussian standard deviation");
  calibrate->add_option("--support", support, "lattice support")->delimiter(',');
  calibrate->add_option("--weights", weights, "lattice base weights")->delimiter(',');
  calibrate->add_option("--out", c.out, "output file (default stdout)");
  calibrate->add_option("--summary", c.summary, "JSON summary file");

  // walk
  double start = 0.0, lower = 0.0, upper = 10.0;
  std::uint64_t reps = 10'000;
  bool tilted = false;
  std::optional<double> green_scale, green_offset;
  std::uint64_t max_steps = kbrw::kDefaultMaxWalkSteps;
  auto* walk = app.add_subcommand("walk", "two-barrier walks, one CSV row per walk");
  add_common(walk, c);
  walk->add_option("--start", start);
  walk->add_option("--lower", lower);
  walk->add_option("--upper", upper);
  walk->add_option("--reps", reps);
  walk->add_flag("--tilted", tilted, "use the tilted step law");
  walk->add_option("--green-scale", green_scale, "affine map R = scale*S + offset for Green sums");
  walk->add_option("--green-offset", green_offset);
  walk->add_option("--max-steps", max_steps);

  // brw
  double x = 0.0;
  std::optional<double> level_a, level_k;
  auto* brw = app.add_subcommand("brw", "branching random walk runs, one CSV row per run");
  add_common(brw, c);
  brw->add_option("--x", x, "start position");
  brw->add_option("--a", level_a, "count first passages below a");
  brw->add_option("--k", level_k, "absorb above k");
  brw->add_option("--reps", reps);
  add_caps(brw, caps);

  // tail-z
  std::vector<double> grid;
  auto* tail_z = app.add_subcommand("tail-z", "P(Z > n) on a threshold grid");
  add_common(tail_z, c);
  tail_z->add_option("--x", x);
  tail_z->add_option("--grid", grid, "ascending thresholds")->delimiter(',')->required();
  tail_z->add_option("--reps", reps);
  add_caps(tail_z, caps);

  // tail-max
  bool exact = false;
  auto* tail_max = app.add_subcommand("tail-max", "P(M >= k) on a level grid");
  add_common(tail_max, c);
  tail_max->add_option("--x", x);
  tail_max->add_option("--grid", grid, "ascending levels")->delimiter(',')->required();
  tail_max->add_option("--reps", reps);
  tail_max->add_flag("--exact", exact, "strip-survival fixed point (lattice models)");
  std::uint64_t max_sweeps = 1'000'000;
  tail_max->add_option("--max-sweeps", max_sweeps, "fixed-point sweep cap for --exact");
  add_caps(tail_max, caps);

  // moments
  std::string quantity = "zak";
  std::string source = "all";
  double y = 0.0;
  auto* moments = app.add_subcommand("moments", "E[Z(a,k)] or E[H_k] from the available sources");
  add_common(moments, c);
  moments->add_option("--quantity", quantity, "zak | h")->check(CLI::IsMember({"zak", "h"}));
  moments->add_option("--source", source, "direct | many-to-one | exact | all")
      ->check(CLI::IsMember({"direct", "many-to-one", "exact", "all"}));
  moments->add_option("--y", y, "start for Z(a,k)");
  moments->add_option("--x", x, "start for H_k");
  moments->add_option("--a", level_a);
  moments->add_option("--k", level_k)->required();
  moments->add_option("--reps", reps);
  add_caps(moments, caps);

  // green
  std::vector<int> ks;
  std::vector<int> xs = {0};
  bool base_law = false;
  auto* green = app.add_subcommand("green", "exact Green-sum quantities on a k grid");
  add_common(green, c);
  green->add_option("--k", ks, "levels")->delimiter(',')->required();
  green->add_option("--x", xs, "offsets below k")->delimiter(',');
  green->add_flag("--base", base_law, "use the base law instead of the tilted law");

  // two-stage
  std::vector<double> ns;
  std::uint64_t reps1 = kbrw::TwoStageOptions{}.reps_stage1;
  std::uint64_t reps2 = kbrw::TwoStageOptions{}.reps_stage2;
  auto* two_stage = app.add_subcommand("two-stage", "product-form lower-bound tail estimate");
  add_common(two_stage, c);
  two_stage->add_option("--x", x);
  two_stage->add_option("--a", level_a, "count level (default 1)");
  two_stage->add_option("--n", ns, "thresholds")->delimiter(',')->required();
  two_stage->add_option("--reps1", reps1, "pilot and reach replications");
  two_stage->add_option("--reps2", reps2, "second-stage replications");
  add_caps(two_stage, caps);

  // selftest
  std::vector<int> only;
  auto* selftest = app.add_subcommand("selftest", "run the acceptance suite");
  selftest->add_option("--only", only, "criterion ids")->delimiter(',');
  selftest->add_option("--seed", c.seed, "master seed (default: pinned)");
  selftest->add_option("--summary", c.summary, "JSON summary file");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      kbrw::fail(kbrw::ErrorKind::validation, e.what());
    }

    if (*calibrate) {
      json mj;
      if (!c.model_path.empty()) {
        std::ifstream f(c.model_path);
        if (!f) kbrw::fail(kbrw::ErrorKind::validation, "cannot read model file " + c.model_path);
        try {
          mj = json::parse(f);
        } catch (const json::exception& e) {
          kbrw::fail(kbrw::ErrorKind::validation, std::string("model file: ") + e.what());
        }
      } else {
        mj = {{"family", family}, {"b", b}, {"params", json::object()}};
        if (family == "gaussian") mj["params"]["sigma"] = sigma;
        if (family == "user_lattice") mj["params"] = {{"support", support}, {"probs", weights}};
      }
      mj["critical"] = true;
      const kbrw::StepModel model = kbrw::model_from_json(mj);
      const json config = make_config("calibrate", mj, 0, json::object());
      json out = kbrw::model_to_json(model);
      out["criticality_residual"] = model.criticality_residual();
      out["residual_convention"] = "phi(rho) - 1/b; > 0 supercritical, < 0 subcritical";
      out["tilted_mean"] = model.tilted_mean();
      write_text(c.out, stamp(out, config).dump(2) + "\n");
      write_summary(c, config, &model, t0);
      return 0;
    }

    if (*selftest) {
      kbrw::AcceptanceOptions ao;
      ao.workers = kbrw::workers_from_env();
      if (selftest->count("--seed")) ao.seed = c.seed;
      ao.only.insert(only.begin(), only.end());
      const auto results = kbrw::run_acceptance(ao, std::cout);
      const bool ok = kbrw::all_passed(results);
      std::cout << (ok ? "ALL PASS" : "SOME CRITERIA FAILED") << "\n";
      if (!c.summary.empty()) {
        json rs = json::array();
        for (const auto& r : results)
          rs.push_back({{"id", r.id}, {"title", r.title}, {"passed", r.passed}, {"detail", r.detail},
                        {"seconds", r.seconds}});
        const json config = make_config("selftest", nullptr, ao.seed, {{"only", only}});
        json s = {{"model", nullptr}, {"rho", nullptr}, {"seed", ao.seed},
                  {"runtime", std::chrono::duration<double>(Clock::now() - t0).count()},
                  {"criteria", rs}, {"passed", ok}};
        write_text(c.summary, stamp(s, config).dump(2) + "\n");
      }
      return ok ? 0 : 1;
    }

    const kbrw::StepModel model = kbrw::load_model(c.model_path);
    const json model_json = kbrw::model_to_json(model);

    if (*walk) {
      const kbrw::StepSampler steps = tilted ? kbrw::StepSampler::tilted(model) : kbrw::StepSampler::base(model);
      std::optional<kbrw::AffineMap> map;
      if (green_scale || green_offset) map = kbrw::AffineMap{green_scale.value_or(1.0), green_offset.value_or(0.0)};
      const json params = {{"start", start}, {"lower", lower}, {"upper", upper}, {"reps", reps},
                           {"tilted", tilted}, {"max_steps", max_steps},
                           {"green_scale", green_scale ? json(*green_scale) : json(nullptr)},
                           {"green_offset", green_offset ? json(*green_offset) : json(nullptr)}};
      const json config = make_config("walk", model_json, c.seed, params);
      const auto walks = kbrw::replicate_collect<kbrw::WalkFunctionals>(reps, schedule(), [&] {
        return [&](std::uint64_t rep) {
          kbrw::Rng rng(c.seed, rep);
          return kbrw::simulate_walk(steps, start, lower, upper, map, rng, max_steps);
        };
      });
      std::uint64_t top = 0, censored = 0;
      for (const auto& w : walks) {
        if (w.censored)
          ++censored;
        else if (w.exit == kbrw::Exit::top)
          ++top;
      }
      write_text(c.out, kbrw::walks_csv(walks, config));
      write_summary(c, config, &model, t0, {{"top_exits", top}, {"censored", censored}});
      if (censored * 100 > reps) {
        warn_censoring(std::to_string(censored) + " walks hit max_steps");
        exit_status = 3;
      }
    } else if (*brw) {
      const kbrw::BrwConfig cfg{x, level_a, level_k, caps.caps()};
      cfg.validate();
      const json params = {{"x", x}, {"a", level_a ? json(*level_a) : json(nullptr)},
                           {"k", level_k ? json(*level_k) : json(nullptr)}, {"reps", reps},
                           {"caps", caps.to_json()}};
      const json config = make_config("brw", model_json, c.seed, params);
      const auto runs = kbrw::replicate_collect<kbrw::BrwRun>(reps, schedule(), [&] {
        return [sim = kbrw::BrwSimulator(model, cfg), &c](std::uint64_t rep) mutable {
          kbrw::Rng rng(c.seed, rep);
          return sim(rng);
        };
      });
      std::uint64_t censored = 0;
      for (const auto& r : runs) censored += r.is_censored() ? 1 : 0;
      write_text(c.out, kbrw::brw_runs_csv(runs, config));
      write_summary(c, config, &model, t0, {{"censored", censored}});
      if (censored * 100 > reps) {
        warn_censoring(std::to_string(censored) + " runs hit a cap");
        exit_status = 3;
      }
    } else if (*tail_z || *tail_max) {
      const bool is_z = tail_z->parsed();
      const json params = {{"x", x}, {"grid", grid}, {"reps", reps}, {"exact", exact}, {"max_sweeps", max_sweeps},
                           {"caps", caps.to_json()}};
      const json config = make_config(is_z ? "tail-z" : "tail-max", model_json, c.seed, params);
      kbrw::TailCurve curve;
      if (!is_z && exact) {
        std::vector<int> kk;
        for (double g : grid) {
          if (g != std::floor(g)) kbrw::fail(kbrw::ErrorKind::validation, "tail-max --exact: integer levels required");
          kk.push_back(static_cast<int>(g));
        }
        if (x != std::floor(x)) kbrw::fail(kbrw::ErrorKind::validation, "tail-max --exact: integer x required");
        curve = kbrw::tail_curve_M_exact(model, static_cast<int>(x), kk, max_sweeps);
      } else {
        kbrw::TreeMcOptions mc{reps, c.seed, schedule(), caps.caps()};
        curve = is_z ? kbrw::tail_curve_Z(model, x, grid, mc) : kbrw::tail_curve_M(model, x, grid, mc);
      }
      write_text(c.out, kbrw::tail_curve_csv(curve, config));
      write_summary(c, config, &model, t0, {{"censored_reps", curve.censored_reps}});
      if (!curve.exact && tail_excess_exclusion(curve)) {
        warn_censoring("more than 1% of runs excluded at some threshold");
        exit_status = 3;
      }
    } else if (*moments) {
      const bool zak = quantity == "zak";
      if (zak && !level_a) kbrw::fail(kbrw::ErrorKind::validation, "moments: --a is required for zak");
      const double k = *level_k;
      const json params = {{"quantity", quantity}, {"source", source}, {"y", y}, {"x", x},
                           {"a", level_a ? json(*level_a) : json(nullptr)}, {"k", k}, {"reps", reps},
                           {"caps", caps.to_json()}};
      const json config = make_config("moments", model_json, c.seed, params);
      kbrw::TreeMcOptions mc{reps, c.seed, schedule(), caps.caps()};
      std::vector<kbrw::MomentReport> reports;
      auto want = [&](const char* s) { return source == "all" || source == s; };
      auto as_int = [](double v, const char* what) {
        if (v != std::floor(v)) kbrw::fail(kbrw::ErrorKind::validation, std::string("exact moments: integer ") + what);
        return static_cast<int>(v);
      };
      if (want("exact") && (model.is_lattice() || source == "exact")) {
        reports.push_back(zak ? kbrw::moment_Zak_exact(model, as_int(y, "y"), as_int(*level_a, "a"), as_int(k, "k"))
                              : kbrw::moment_H_exact(model, as_int(x, "x"), as_int(k, "k")));
      }
      if (want("direct"))
        reports.push_back(zak ? kbrw::moment_Zak_direct(model, y, *level_a, k, mc) : kbrw::moment_H_direct(model, x, k, mc));
      if (want("many-to-one"))
        reports.push_back(zak ? kbrw::moment_Zak_many_to_one(model, y, *level_a, k, mc)
                              : kbrw::moment_H_many_to_one(model, x, k, mc));
      json arr = json::array();
      bool warn = false;
      for (const auto& r : reports) {
        arr.push_back(kbrw::to_json(r));
        warn = warn || r.censoring_warning;
      }
      json agreement = json::array();
      for (std::size_t i = 0; i < reports.size(); ++i)
        for (std::size_t j = i + 1; j < reports.size(); ++j)
          agreement.push_back({{"a", kbrw::to_string(reports[i].source)},
                               {"b", kbrw::to_string(reports[j].source)},
                               {"agree_3se", kbrw::agree(reports[i], reports[j])}});
      write_text(c.out, stamp({{"reports", arr}, {"agreement", agreement}}, config).dump(2) + "\n");
      write_summary(c, config, &model, t0);
      if (warn) {
        warn_censoring("more than 1% of replications censored");
        exit_status = 3;
      }
    } else if (*green) {
      const json params = {{"k", ks}, {"x", xs}, {"base", base_law}};
      const json config = make_config("green", model_json, c.seed, params);
      const kbrw::LatticeLaw law = base_law ? model.lattice_law() : model.tilted_lattice_law();
      std::ostringstream csv;
      csv << kbrw::provenance_line(config) << "\n" << "k,x,quantity,value,scaled\n";
      const std::pair<kbrw::GreenQuantity, const char*> qs[] = {
          {kbrw::GreenQuantity::zero_to_top, "zero_to_top"},
          {kbrw::GreenQuantity::near_top_to_top, "near_top_to_top"},
          {kbrw::GreenQuantity::near_top_to_bottom, "near_top_to_bottom"}};
      for (int k : ks)
        for (int xx : xs)
          for (const auto& [q, name] : qs) {
            if (xx > k) continue;
            csv << k << "," << xx << "," << name << "," << kbrw::format_double(kbrw::exact_green_quantity(law, k, xx, q))
                << "," << kbrw::format_double(kbrw::scaled_green_quantity(law, k, xx, q)) << "\n";
          }
      write_text(c.out, csv.str());
      write_summary(c, config, &model, t0);
    } else if (*two_stage) {
      const double a = level_a.value_or(1.0);
      const json params = {{"x", x}, {"a", a}, {"n", ns}, {"reps1", reps1}, {"reps2", reps2},
                           {"caps", caps.to_json()}};
      const json config = make_config("two-stage", model_json, c.seed, params);
      json arr = json::array();
      bool warn = false;
      for (double n : ns) {
        kbrw::TwoStageOptions opts{reps1, reps2, c.seed, schedule(), caps.caps()};
        const kbrw::TwoStageResult r = kbrw::two_stage_tail(model, x, a, n, opts);
        json j = kbrw::to_json(r);
        j["n"] = n;
        arr.push_back(j);
        warn = warn || r.censoring_warning;
      }
      write_text(c.out, stamp({{"results", arr}}, config).dump(2) + "\n");
      write_summary(c, config, &model, t0);
      if (warn) {
        warn_censoring("more than 1% of second-stage runs censored");
        exit_status = 3;
      }
    }
  } catch (const kbrw::Error& e) {
    std::cerr << json{{"error", {{"kind", kbrw::to_string(e.kind())}, {"message", e.what()}}}}.dump() << "\n";
    return kbrw::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << json{{"error", {{"kind", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
  return exit_status;
}
