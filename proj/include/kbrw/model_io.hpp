#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "kbrw/step_model.hpp"

namespace kbrw {

inline constexpr int kConfigSchemaVersion = 1;

/// Model config:
///   { "schema_version": 1, "family": "two_point" | "gaussian" | "user_lattice",
///     "params": {...}, "b": 2, "critical": bool }
/// params: two_point {"p"}; gaussian {"mu", "sigma"}; user_lattice {"support", "probs"}.
/// With "critical": true the free parameter is calibrated (p and mu may be
/// omitted; lattice probs act as base weights). The returned model has rho solved.
StepModel model_from_json(const nlohmann::json& j);
StepModel load_model(const std::string& path);

/// {family, params, b, rho, phi_at_rho}.
nlohmann::json model_to_json(const StepModel& model);

}  // namespace kbrw
