#include "lobmfg/pipeline.hpp"
#include "lobmfg/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitModule = 3;

json error_record(const std::string& stage, const std::string& type, const std::string& message) {
    return {{"status", "error"}, {"stage", stage}, {"type", type}, {"message", message},
            {"details", json::object()}};
}

void report_error(const json& record, const std::filesystem::path* dir) {
    std::cerr << record.dump() << '\n';
    if (!dir) return;
    std::error_code ec;
    std::filesystem::create_directories(*dir, ec);
    std::ofstream out(*dir / "error.json");
    if (out) out << record.dump(2) << '\n';
}

lobmfg::Scenario pick_scenario(const std::string& preset, const std::string& config) {
    if (!config.empty()) return lobmfg::load_scenario(config);
    return lobmfg::preset(preset.empty() ? "test1" : preset);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field-game order book solver and simulator"};
    app.require_subcommand(1);

    std::string preset, config, output = "out", stage = "all";
    std::uint64_t seed = 0, events = 0;
    double qmax = 0.0;

    auto* run = app.add_subcommand("run", "Solve a scenario and write the analysis artifacts");
    auto* run_preset = run->add_option("--preset", preset, "Built-in scenario name");
    run->add_option("--config", config, "JSON scenario file")->excludes(run_preset);
    run->add_option("--output", output, "Output directory")->capture_default_str();
    run->add_option("--stage", stage, "solve|frontiers|measure|simulate|metrics|all")
        ->check(CLI::IsMember({"solve", "frontiers", "measure", "simulate", "metrics", "all"}))
        ->capture_default_str();
    auto* seed_opt = run->add_option("--seed", seed, "Simulation seed");
    auto* qmax_opt = run->add_option("--qmax", qmax, "Largest queue size (shares)");
    auto* events_opt = run->add_option("--events", events, "Number of simulated events");

    std::string vpreset, vconfig;
    double vqmax = 0.0;
    auto* validate = app.add_subcommand("validate", "Check a scenario without solving it");
    auto* vpreset_opt = validate->add_option("--preset", vpreset, "Built-in scenario name");
    validate->add_option("--config", vconfig, "JSON scenario file")->excludes(vpreset_opt);
    auto* vqmax_opt = validate->add_option("--qmax", vqmax, "Largest queue size (shares)");

    app.add_subcommand("presets", "List the built-in scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (app.got_subcommand("presets")) {
        for (const auto& name : lobmfg::preset_names()) std::cout << name << '\n';
        return 0;
    }

    if (app.got_subcommand(validate)) {
        json doc;
        try {
            if (!vconfig.empty()) {
                std::ifstream in(vconfig);
                if (!in) throw lobmfg::ConfigError("cannot read config file '" + vconfig + "'");
                doc = json::parse(in);
            } else {
                doc = lobmfg::scenario_to_json(lobmfg::preset(vpreset.empty() ? "test1" : vpreset));
            }
        } catch (const std::exception& e) {
            report_error(error_record("validate", "config", e.what()), nullptr);
            return kExitUsage;
        }
        if (*vqmax_opt) doc["grid_max"] = vqmax;
        const auto report = lobmfg::validate_document(doc);
        std::cout << lobmfg::report_to_json(report).dump(2) << '\n';
        return report.valid ? 0 : kExitUsage;
    }

    const std::filesystem::path dir = output;
    lobmfg::RunOptions options;
    try {
        options.scenario = pick_scenario(preset, config);
        if (*qmax_opt) options.scenario.config.grid_max = qmax;
        if (*seed_opt) options.scenario.seed = seed;
        if (*events_opt) options.scenario.events = events;
        options.scenario.config.validate();
        options.stage = lobmfg::parse_stage(stage);
        options.output = dir;
    } catch (const std::exception& e) {
        report_error(error_record("config", "config", e.what()), &dir);
        return kExitUsage;
    }

    try {
        const auto result = lobmfg::run_pipeline(options);
        json summary = {{"status", "ok"}, {"output", dir.string()}, {"timings", result.timings}};
        std::cout << summary.dump() << '\n';
    } catch (const lobmfg::StageError& e) {
        report_error(e.record(), &dir);
        return kExitModule;
    } catch (const std::exception& e) {
        report_error(error_record("run", "runtime", e.what()), &dir);
        return kExitModule;
    }
    return 0;
}
