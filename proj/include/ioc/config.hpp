#pragma once

#include "ioc/estimator.hpp"

#include <nlohmann/json_fwd.hpp>

namespace ioc {

// One configuration file drives every CLI subcommand.
struct RunConfig {
    Scenario scenario;
    EstimatorOptions estimator;
    std::uint64_t seed = 0;
};

RunConfig parse_config(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

// Reads and validates a JSON configuration file.
RunConfig load_config(const std::string& path);

}  // namespace ioc
