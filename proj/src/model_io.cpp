#include "kbrw/model_io.hpp"

#include <fstream>

#include "kbrw/error.hpp"

namespace kbrw {

namespace {

template <class T>
T get_required(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.contains(key)) fail(ErrorKind::validation, std::string(where) + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, std::string(where) + ": bad field '" + key + "': " + e.what());
  }
}

}  // namespace

StepModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorKind::validation, "model: config must be a JSON object");
  const int version = j.value("schema_version", kConfigSchemaVersion);
  if (version != kConfigSchemaVersion)
    fail(ErrorKind::validation, "model: unsupported schema_version " + std::to_string(version));
  const auto family = get_required<std::string>(j, "family", "model");
  const int b = get_required<int>(j, "b", "model");
  const bool critical = j.value("critical", false);
  const nlohmann::json params = j.value("params", nlohmann::json::object());

  StepFamily fam;
  if (family == "two_point") {
    fam = TwoPoint{critical ? 0.5 : get_required<double>(params, "p", "two_point")};
  } else if (family == "gaussian") {
    fam = Gaussian{critical ? 0.0 : get_required<double>(params, "mu", "gaussian"),
                   get_required<double>(params, "sigma", "gaussian")};
  } else if (family == "user_lattice") {
    fam = UserLattice{get_required<std::vector<int>>(params, "support", "user_lattice"),
                      get_required<std::vector<double>>(params, "probs", "user_lattice")};
  } else {
    fail(ErrorKind::validation, "model: unknown family '" + family + "'");
  }

  if (critical) return calibrate_critical(fam, b);
  StepModel model(std::move(fam), b);
  model.find_rho();
  return model;
}

StepModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::validation, "model: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::validation, "model: invalid JSON in '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

nlohmann::json model_to_json(const StepModel& model) {
  nlohmann::json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["family"] = family_name(model.family());
  j["b"] = model.branching();
  if (const auto* f = std::get_if<TwoPoint>(&model.family())) {
    j["params"] = {{"p", f->p}};
  } else if (const auto* g = std::get_if<Gaussian>(&model.family())) {
    j["params"] = {{"mu", g->mu}, {"sigma", g->sigma}};
  } else {
    const auto& u = std::get<UserLattice>(model.family());
    j["params"] = {{"support", u.support}, {"probs", u.probs}};
  }
  if (model.has_rho()) {
    j["rho"] = model.rho();
    j["phi_at_rho"] = model.phi_at_rho();
  }
  return j;
}

}  // namespace kbrw
