#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "jlct/pipeline.hpp"
#include "jlct/simgen.hpp"

namespace jlct {

/// Roles file: {"split": [...], "survival": [...], "fixed": [...],
/// "random": [...]} plus optional "subject", "time", "outcome",
/// "event_time", "status" column names.
VariableRoles roles_from_json(const nlohmann::json& j);
nlohmann::json roles_to_json(const VariableRoles& roles);
VariableRoles read_roles(const std::filesystem::path& path);

nlohmann::json model_to_json(const JlctModel& model);
JlctModel model_from_json(const nlohmann::json& j);

/// Everything needed to score predictions against a simulated dataset:
/// scenario, per-subject event process and per-record true classes.
nlohmann::json truth_to_json(const SimTruth& truth);
SimTruth truth_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes `j` indented, with a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace jlct
