#pragma once

#include <cstdint>
#include <string>

#include "icgkit/classify.hpp"
#include "icgkit/deformation.hpp"
#include "icgkit/features.hpp"
#include "icgkit/json_util.hpp"
#include "icgkit/kinetics.hpp"
#include "icgkit/pixfield.hpp"
#include "icgkit/scale.hpp"
#include "icgkit/tracking.hpp"

namespace icgkit {

enum class LogLevel { error, warn, info, debug };

const char* to_string(LogLevel level);
LogLevel parse_log_level(std::string_view);  // throws ConfigError

// Settings shared by all subcommands. Every section of the JSON form is
// optional and overlays the defaults; unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    LogLevel log_level = LogLevel::warn;
    TrackConfig track;
    StabilizeConfig stabilize;
    FitConfig fit;
    FeatureConfig features;
    HeatmapConfig heatmap;
    Hyperparams classify;
    ScaleConfig recommend;
    double flag_threshold = 0.7;
};

Json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace icgkit
