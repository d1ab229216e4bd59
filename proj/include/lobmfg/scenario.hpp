#pragma once

#include "lobmfg/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace lobmfg {

/** A market configuration plus the run settings of the simulation stages. */
struct Scenario {
    std::string name = "custom";
    MarketConfig config;
    std::uint64_t seed = 42;
    std::uint64_t events = 100000;
    double frontier_step = 0.5;  // x0 sampling step of the analytic curves, in shares
};

std::vector<std::string> preset_names();
/** Throws ConfigError for an unknown name. */
Scenario preset(const std::string& name);

/** Strict reader: unknown keys, wrong types and invalid values throw ConfigError. */
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& scenario);

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    std::vector<std::string> notes;
    double suggested_grid_max = 0.0;
    std::vector<double> x0_star;  // per class, NaN without non-SOR flow
};

/** Checks without running any solver; never throws for invalid parameters. */
ValidationReport validate_scenario(const Scenario& scenario);
ValidationReport validate_document(const nlohmann::json& doc);
nlohmann::json report_to_json(const ValidationReport& report);

/** max(40 max q, 2 x0*) rounded up to the grid step. */
double suggested_grid_max(const MarketConfig& config);

}  // namespace lobmfg
