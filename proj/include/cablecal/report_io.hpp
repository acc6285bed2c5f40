/**
 * @file report_io.hpp
 * @brief JSON forms of run configurations and calibration reports.
 *
 * The *_from_json functions overlay the keys present in the document onto a
 * base value, which is how config files sit between built-in defaults and
 * command-line flags. Unknown keys are rejected.
 */
#pragma once

#include <filesystem>

#include "json.hpp"

#include "cablecal/pipeline.hpp"
#include "cablecal/simdata.hpp"

namespace cablecal {

using Json = nlohmann::ordered_json;

Json to_json(const CalibrationConfig& cfg);
/// @throws InvalidParameter on unknown keys or wrong types.
CalibrationConfig calibration_config_from_json(const Json& j, CalibrationConfig base = {});

Json to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_config_from_json(const Json& j, ScenarioConfig base = {});

Json to_json(const CalibrationReport& rep);
CalibrationReport report_from_json(const Json& j);

/// @throws IoError
Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace cablecal
