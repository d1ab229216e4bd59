#pragma once

#include "lobmfg/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace lobmfg {

enum class Stage { Solve, Frontiers, Measure, Simulate, Metrics, All };

Stage parse_stage(const std::string& name);
std::string stage_name(Stage stage);

/** A module failure annotated with the pipeline stage it happened in. */
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, std::string type, const std::string& what,
               nlohmann::json details = nlohmann::json::object())
        : std::runtime_error(what), stage_(std::move(stage)), type_(std::move(type)),
          details_(std::move(details)) {}
    const std::string& stage() const { return stage_; }
    const std::string& type() const { return type_; }
    nlohmann::json record() const;

private:
    std::string stage_;
    std::string type_;
    nlohmann::json details_;
};

struct RunOptions {
    Scenario scenario;
    std::filesystem::path output = "out";
    Stage stage = Stage::All;
};

struct RunResult {
    nlohmann::json metrics;  // contents of metrics.json
    nlohmann::json timings;  // seconds per stage, kept apart so metrics.json is reproducible
};

/**
 * Runs the requested stage with its prerequisites (solve always, the
 * measure before simulation and metrics) and writes the artifacts.
 * Module failures are rethrown as StageError.
 */
RunResult run_pipeline(const RunOptions& options);

}  // namespace lobmfg
