#include "kbrw/output.hpp"

#include <cinttypes>
#include <cstdio>
#include <sstream>

namespace kbrw {

std::uint64_t config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string provenance_line(const nlohmann::json& config) {
  return std::string("# kbrw ") + kVersion + " config_hash=" + hex64(config_hash(config));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string tail_curve_csv(const TailCurve& curve, const nlohmann::json& config) {
  std::ostringstream out;
  out << provenance_line(config) << '\n';
  out << "threshold,hits,reps,p_hat,ci_lo,ci_hi,scaled,excluded\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto ci = curve.ci(i);
    out << format_double(curve.thresholds[i]) << ',' << (curve.exact ? 0 : curve.hits[i]) << ','
        << (curve.exact ? 0 : curve.trials[i]) << ',' << format_double(curve.p_hat(i)) << ','
        << format_double(ci.lo) << ',' << format_double(ci.hi) << ','
        << format_double(curve.scaled(i)) << ',' << (curve.exact ? 0 : curve.excluded[i]) << '\n';
  }
  return out.str();
}

std::string brw_runs_csv(const std::vector<BrwRun>& runs, const nlohmann::json& config) {
  std::ostringstream out;
  out << provenance_line(config) << '\n';
  out << "rep,Z,Z0,Zak,Hk,M,T_ext,censored\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const BrwRun& r = runs[i];
    out << i << ',' << r.Z << ',' << r.Z0 << ',' << r.Zak << ',' << r.Hk << ','
        << format_double(r.M) << ',' << r.T_ext << ',' << to_string(r.censored) << '\n';
  }
  return out.str();
}

std::string walks_csv(const std::vector<WalkFunctionals>& walks, const nlohmann::json& config) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::ostringstream out;
  out << provenance_line(config) << '\n';
  out << "exit,steps,overshoot,undershoot,green_top,green_bottom\n";
  for (const WalkFunctionals& w : walks) {
    out << (w.censored ? "censored" : (w.exit == Exit::top ? "top" : "bottom")) << ','
        << w.steps_taken << ',' << opt(w.overshoot) << ',' << opt(w.undershoot) << ','
        << opt(w.green_top) << ',' << opt(w.green_bottom) << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const MomentReport& r) {
  return {{"value", r.value},       {"stderr", r.std_error},
          {"tolerance", r.tolerance}, {"source", to_string(r.source)},
          {"reps", r.reps},         {"censored", r.censored},
          {"censoring_warning", r.censoring_warning}, {"scaled", r.scaled}};
}

nlohmann::json to_json(const TwoStageResult& r) {
  auto stage = [](const StageEstimate& s) {
    return nlohmann::json{{"p", s.p}, {"stderr", s.std_error}, {"reps", s.reps},
                          {"excluded", s.excluded}, {"exact", s.exact}};
  };
  return {{"mu_hat", r.mu_hat},     {"pilot_k", r.pilot_k},
          {"k_star", r.k_star},     {"level", r.level},
          {"reach", stage(r.reach)}, {"progeny", stage(r.progeny)},
          {"estimate", r.estimate}, {"stderr", r.std_error},
          {"ci_lo", r.ci.lo},       {"ci_hi", r.ci.hi},
          {"censoring_warning", r.censoring_warning},
          {"label", r.label},       {"scaled", r.scaled}};
}

}  // namespace kbrw
