#pragma once

#include <string>

#include <json.hpp>

#include "fgm/engine.hpp"

namespace fgm {

inline constexpr int kModelFormatVersion = 1;

/// Keys come out sorted. Wall-clock seconds are omitted unless
/// include_timing is set, so that equal runs give byte-equal files.
nlohmann::json model_to_json(const Model& model, bool include_timing = false);
/// Throws DataError on a missing field, a wrong type or an unknown version.
Model model_from_json(const nlohmann::json& j);

std::string model_to_string(const Model& model, bool include_timing = false);

void save_model(const std::string& path, const Model& model, bool include_timing = false);
Model load_model(const std::string& path);

std::string to_string(ScalingPolicy policy);
ScalingPolicy parse_scaling(const std::string& name);

}  // namespace fgm
