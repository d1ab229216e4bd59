#include "lobmfg/output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace lobmfg {

using nlohmann::json;

std::string format_double(double x) {
    if (std::isnan(x)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void write_values_csv(std::ostream& out, const Grid& grid, const Lattice& lat) {
    out << "Q_a,Q_b,value\n";
    for (std::size_t i = 0; i < lat.n; ++i)
        for (std::size_t j = 0; j < lat.n; ++j)
            out << format_double(lat.size(i)) << ',' << format_double(lat.size(j)) << ','
                << format_double(grid(i, j)) << '\n';
}

void write_decisions_csv(std::ostream& out, const DecisionField& d, std::size_t c) {
    const Lattice& lat = d.lattice;
    out << "Q_a,Q_b,lp_sell,lp_buy,region\n";
    for (std::size_t i = 0; i < lat.n; ++i)
        for (std::size_t j = 0; j < lat.n; ++j) {
            out << format_double(lat.size(i)) << ',' << format_double(lat.size(j)) << ','
                << format_double(d.sell[c](i, j)) << ',' << format_double(d.buy[c](i, j)) << ','
                << region_name(d.region(c, i, j));
            if (d.sell.size() == 2) out << ";R" << d.combined_region(i, j);
            out << '\n';
        }
}

void write_frontier_csv(std::ostream& out, const FrontierCurve& curve, bool with_mirror) {
    out << "Q_a,Q_b,branch\n";
    for (const auto& [a, b] : curve.points)
        out << format_double(a) << ',' << format_double(b) << ",lower\n";
    if (!with_mirror) return;
    for (const auto& [a, b] : mirror(curve).points)
        out << format_double(a) << ',' << format_double(b) << ",upper\n";
}

void write_measure_csv(std::ostream& out, const StationaryMeasure& m) {
    const Lattice& lat = m.lattice;
    out << "Q_a,Q_b,mass\n";
    for (std::size_t i = 0; i < lat.n; ++i)
        for (std::size_t j = 0; j < lat.n; ++j)
            out << format_double(lat.size(i)) << ',' << format_double(lat.size(j)) << ','
                << format_double(m(i, j)) << '\n';
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr, const MarketConfig& config) {
    const Lattice& lat = tr.lattice;
    out << "t,Q_a,Q_b,event,class,price\n";
    out << "0," << format_double(lat.size(tr.start_i)) << ',' << format_double(lat.size(tr.start_j))
        << ",start,,\n";
    for (const auto& e : tr.events)
        out << format_double(e.time) << ',' << format_double(lat.size(e.i)) << ','
            << format_double(lat.size(e.j)) << ',' << event_name(e.kind) << ','
            << config.classes[e.cls].label << ',' << format_double(e.price) << '\n';
}

namespace {

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

json side_to_json(const SideMetrics& s) {
    return {{"lc_volume", number_or_null(s.lc_volume)},
            {"lp_volume", number_or_null(s.lp_volume)},
            {"lc_price", number_or_null(s.lc_price)},
            {"lp_price", number_or_null(s.lp_price)},
            {"average_price", number_or_null(s.average)}};
}

json trade_to_json(const TradeMetrics& t) {
    return {{"sell", side_to_json(t.sell)},
            {"buy", side_to_json(t.buy)},
            {"spread", number_or_null(t.spread)},
            {"spread_bps", number_or_null(t.spread_bps)},
            {"lc_spread", number_or_null(t.lc_spread)},
            {"effective_spread", number_or_null(t.effective_spread)}};
}

json diagnostics_to_json(const EquilibriumDiagnostics& d) {
    return {{"outer_iterations", d.outer_iterations},
            {"value_residual", d.value_residual},
            {"oscillation_detected", d.oscillation_detected},
            {"newton_iterations", d.newton_iterations},
            {"mixed_indicators", d.mixed_indicators},
            {"complementarity_residual", d.complementarity_residual},
            {"balance_residual", d.balance_residual}};
}

json distance_to_json(const DistanceSummary& d) {
    return {{"mean_grid", d.mean},
            {"max_grid", d.max},
            {"mean_shares", d.mean_shares},
            {"max_shares", d.max_shares},
            {"points", d.points}};
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    auto out = open_output(path);
    out << doc.dump(2) << '\n';
}

}  // namespace lobmfg
