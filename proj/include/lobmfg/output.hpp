#pragma once

#include "lobmfg/equilibrium.hpp"
#include "lobmfg/frontiers.hpp"
#include "lobmfg/markov.hpp"
#include "lobmfg/metrics.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

namespace lobmfg {

/** Shortest decimal text that reads back to the same double; empty for NaN. */
std::string format_double(double x);

void write_values_csv(std::ostream& out, const Grid& grid, const Lattice& lattice);
void write_decisions_csv(std::ostream& out, const DecisionField& decisions, std::size_t c);
/** Columns Q_a, Q_b, branch; the lower branch is followed by its mirror image. */
void write_frontier_csv(std::ostream& out, const FrontierCurve& curve, bool with_mirror);
void write_measure_csv(std::ostream& out, const StationaryMeasure& measure);
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory,
                          const MarketConfig& config);

nlohmann::json side_to_json(const SideMetrics& s);
nlohmann::json trade_to_json(const TradeMetrics& t);
nlohmann::json diagnostics_to_json(const EquilibriumDiagnostics& d);
nlohmann::json distance_to_json(const DistanceSummary& d);

/** Opens the file for writing or throws std::runtime_error naming it. */
std::ofstream open_output(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace lobmfg
