#include "lobmfg/pipeline.hpp"

#include "lobmfg/equilibrium.hpp"
#include "lobmfg/frontiers.hpp"
#include "lobmfg/markov.hpp"
#include "lobmfg/metrics.hpp"
#include "lobmfg/output.hpp"

#include <chrono>
#include <cmath>

namespace lobmfg {

using nlohmann::json;

Stage parse_stage(const std::string& name) {
    if (name == "solve") return Stage::Solve;
    if (name == "frontiers") return Stage::Frontiers;
    if (name == "measure") return Stage::Measure;
    if (name == "simulate") return Stage::Simulate;
    if (name == "metrics") return Stage::Metrics;
    if (name == "all") return Stage::All;
    throw ConfigError("unknown stage '" + name + "'");
}

std::string stage_name(Stage stage) {
    switch (stage) {
        case Stage::Solve: return "solve";
        case Stage::Frontiers: return "frontiers";
        case Stage::Measure: return "measure";
        case Stage::Simulate: return "simulate";
        case Stage::Metrics: return "metrics";
        case Stage::All: return "all";
    }
    return "unknown";
}

json StageError::record() const {
    return {{"status", "error"}, {"stage", stage_}, {"type", type_}, {"message", what()},
            {"details", details_}};
}

namespace {

template <class F>
auto run_stage(const std::string& stage, json& timings, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto finish = [&] {
        timings[stage] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    try {
        if constexpr (std::is_void_v<decltype(body())>) {
            body();
            finish();
        } else {
            auto result = body();
            finish();
            return result;
        }
    } catch (const StageError&) {
        throw;
    } catch (const LimitCycleError& e) {
        json states = json::array();
        for (const auto& s : e.states()) states.push_back({{"sell", s.sell}, {"class", s.c}, {"i", s.i}, {"j", s.j}});
        throw StageError(stage, "limit_cycle", e.what(),
                         {{"residual", e.residual()}, {"iterations", e.iterations()}, {"states", states}});
    } catch (const SolverError& e) {
        throw StageError(stage, "solver", e.what(),
                         {{"residual", e.residual()}, {"iterations", e.iterations()}});
    } catch (const ConfigError& e) {
        throw StageError(stage, "config", e.what());
    } catch (const DomainError& e) {
        throw StageError(stage, "domain", e.what());
    } catch (const std::exception& e) {
        throw StageError(stage, "runtime", e.what());
    }
}

void write_csv(const std::filesystem::path& path, auto&& writer) {
    auto out = open_output(path);
    writer(out);
}

double cap_mass(const StationaryMeasure& m) {
    const std::size_t n = m.lattice.n;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        total += m(i, n - 1) + m(n - 1, i);
    }
    return total - m(n - 1, n - 1);
}

json point(const Lattice& lat, std::size_t s) {
    return json::array({lat.size(s / lat.n), lat.size(s % lat.n)});
}

}  // namespace

RunResult run_pipeline(const RunOptions& options) {
    const Scenario& sc = options.scenario;
    const MarketConfig& cfg = sc.config;
    const Stage stage = options.stage;
    const std::filesystem::path& dir = options.output;
    const bool want_frontiers = stage == Stage::Frontiers || stage == Stage::All;
    const bool want_simulation = stage == Stage::Simulate || stage == Stage::All;
    const bool want_metrics = stage == Stage::Metrics || stage == Stage::All;
    const bool want_measure = want_simulation || want_metrics || stage == Stage::Measure;

    RunResult result;
    json& timings = result.timings;
    json& doc = result.metrics;
    doc["scenario"] = scenario_to_json(sc);
    doc["stage"] = stage_name(stage);

    run_stage("config", timings, [&] {
        cfg.validate();
        std::filesystem::create_directories(dir);
    });

    const Equilibrium eq = run_stage("solve", timings, [&] { return solve_equilibrium(cfg); });
    const Lattice lat = eq.values.lattice;
    run_stage("write_solution", timings, [&] {
        json diag = diagnostics_to_json(eq.diagnostics);
        json anti = json::array();
        for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
            const std::string& label = cfg.classes[c].label;
            write_csv(dir / ("values_u_" + label + ".csv"),
                      [&](std::ostream& o) { write_values_csv(o, eq.values.u[c], lat); });
            write_csv(dir / ("values_v_" + label + ".csv"),
                      [&](std::ostream& o) { write_values_csv(o, eq.values.v[c], lat); });
            write_csv(dir / ("decisions_" + label + ".csv"),
                      [&](std::ostream& o) { write_decisions_csv(o, eq.decisions, c); });
            anti.push_back(antisymmetry_error(eq.values, cfg, c));
        }
        diag["antisymmetry_error"] = anti;
        if (cfg.classes.size() == 2) {
            double diff = 0.0;
            for (std::size_t s = 0; s < lat.count(); ++s)
                diff = std::max({diff, std::abs(eq.values.u[0].data[s] - eq.values.u[1].data[s]),
                                 std::abs(eq.values.v[0].data[s] - eq.values.v[1].data[s])});
            diag["class_value_difference"] = diff;
        }
        doc["solver"] = diag;
        doc["lattice"] = {{"grid_step", lat.h}, {"nodes_per_side", lat.n}};
    });

    if (want_frontiers) {
        run_stage("frontiers", timings, [&] {
            json out = json::array();
            const bool several = cfg.classes.size() > 1;
            for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
                const std::string suffix = several ? "_" + cfg.classes[c].label : "";
                const auto pc = numeric_pc_curve(eq.decisions, cfg, c);
                const auto cp = numeric_cp_curve(eq.decisions, cfg, c);
                write_csv(dir / ("frontier_numeric_pc" + suffix + ".csv"),
                          [&](std::ostream& o) { write_frontier_csv(o, pc, true); });
                write_csv(dir / ("frontier_numeric_cp" + suffix + ".csv"),
                          [&](std::ostream& o) { write_frontier_csv(o, cp, true); });
                json entry = {{"class", cfg.classes[c].label},
                              {"numeric_pc_points", pc.points.size()},
                              {"numeric_cp_points", cp.points.size()}};
                if (cfg.classes[c].nonsor_intensity > 0.0) {
                    const auto p = FirstOrderParams::from(cfg, c);
                    const auto x0s = x0_samples(p, cfg.grid_max, sc.frontier_step);
                    const auto m0 = m0_curve(p, x0s);
                    M1Diagnostics m1diag;
                    const auto m1 = m1_curve(p, x0s, cfg.grid_max, lat.h / 4.0, &m1diag);
                    write_csv(dir / ("frontier_m0" + suffix + ".csv"),
                              [&](std::ostream& o) { write_frontier_csv(o, m0, true); });
                    write_csv(dir / ("frontier_m1" + suffix + ".csv"),
                              [&](std::ostream& o) { write_frontier_csv(o, m1, true); });
                    entry["x0_star"] = x0_star(p);
                    entry["m1_points"] = m1.points.size();
                    entry["m1_skipped_x0"] = m1diag.skipped_x0.size();
                    if (!pc.points.empty() && !m0.points.empty())
                        entry["distance_pc_m0"] = distance_to_json(boundary_distance(pc, m0, lat.h));
                    if (!cp.points.empty() && !m1.points.empty())
                        entry["distance_cp_m1"] = distance_to_json(boundary_distance(cp, m1, lat.h));
                } else {
                    entry["analytic"] = "not defined without non-SOR flow";
                }
                out.push_back(entry);
            }
            doc["frontiers"] = out;
        });
    }

    if (!want_measure) {
        write_json_file(dir / "metrics.json", doc);
        write_json_file(dir / "timings.json", timings);
        return result;
    }

    const JumpGenerator gen =
        run_stage("generator", timings, [&] { return build_generator(eq.decisions, cfg); });
    const StationaryMeasure measure =
        run_stage("measure", timings, [&] { return stationary_measure(gen); });
    run_stage("write_measure", timings, [&] {
        write_csv(dir / "measure.csv", [&](std::ostream& o) { write_measure_csv(o, measure); });
        json modes = json::array();
        for (std::size_t s : measure.modes(1e-6))
            modes.push_back({{"state", point(lat, s)}, {"mass", measure.mass[s]}});
        doc["measure"] = {{"residual", measure.residual(gen)},
                          {"argmax", point(lat, measure.argmax())},
                          {"modes", modes},
                          {"cap_mass", cap_mass(measure)}};
    });

    if (want_simulation) {
        const Trajectory tr = run_stage("simulate", timings, [&] {
            SimulationSettings s;
            s.events = sc.events;
            s.seed = sc.seed;
            return simulate(gen, cfg, s);
        });
        run_stage("write_trajectory", timings, [&] {
            write_csv(dir / "trajectory.csv",
                      [&](std::ostream& o) { write_trajectory_csv(o, tr, cfg); });
            doc["simulation"] = {{"events", sc.events},
                                 {"seed", sc.seed},
                                 {"horizon", tr.horizon},
                                 {"total_variation_to_measure",
                                  tr.empirical_measure().total_variation(measure)}};
        });
    }

    if (want_metrics) {
        run_stage("metrics", timings, [&] {
            const MarketMetrics mm = market_metrics(measure, eq.decisions, cfg);
            json classes = json::array();
            for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
                json t = trade_to_json(mm.classes[c]);
                t["class"] = cfg.classes[c].label;
                classes.push_back(t);
            }
            const QueueFlow f = queue_flow(measure, gen, cfg);
            doc["metrics"] = {{"classes", classes},
                              {"mix", trade_to_json(mm.mix)},
                              {"queue_flow",
                               {{"ask_insertion", f.ask_insertion},
                                {"ask_consumption", f.ask_consumption},
                                {"bid_insertion", f.bid_insertion},
                                {"bid_consumption", f.bid_consumption}}}};
        });
    }

    write_json_file(dir / "metrics.json", doc);
    write_json_file(dir / "timings.json", timings);
    return result;
}

}  // namespace lobmfg
