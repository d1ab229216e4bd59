// Acceptance suite: prints one PASS/FAIL line per criterion.
// Exit status is 0 once every criterion has been evaluated; with --strict it is
// the number of failed criteria.

#include "lobmfg/equilibrium.hpp"
#include "lobmfg/frontiers.hpp"
#include "lobmfg/markov.hpp"
#include "lobmfg/metrics.hpp"
#include "lobmfg/scenario.hpp"
#include "lobmfg/single_queue.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

using namespace lobmfg;

namespace {

struct Solved {
    MarketConfig config;
    Equilibrium eq;
    JumpGenerator gen;
    StationaryMeasure measure;
    double seconds = 0.0;
};

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::map<std::string, std::shared_ptr<Solved>> cache;

std::shared_ptr<Solved> solved(const std::string& name, double grid_max = 0.0) {
    MarketConfig cfg = preset(name).config;
    if (grid_max > 0.0) cfg.grid_max = grid_max;
    const std::string key = name + "@" + std::to_string(cfg.grid_max);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    Equilibrium eq = solve_equilibrium(cfg);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    JumpGenerator gen = build_generator(eq.decisions, cfg);
    StationaryMeasure m = stationary_measure(gen);
    auto s = std::make_shared<Solved>(Solved{cfg, std::move(eq), std::move(gen), std::move(m), seconds});
    cache[key] = s;
    return s;
}

std::string fmt(double x, int digits = 6) {
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return os.str();
}

std::string node(const Lattice& lat, std::size_t f) {
    return "(" + fmt(lat.size(f / lat.n)) + "," + fmt(lat.size(f % lat.n)) + ")";
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// 1 -------------------------------------------------------------------------
Verdict antisymmetry_suite() {
    Verdict v{true, ""};
    for (const char* name : {"test1", "test2", "test3", "test4"}) {
        const MarketConfig base = preset(name).config;
        const double grid = 200.0 * base.grid_step();
        const auto s = solved(name, grid);
        const double err = antisymmetry_error(s->eq.values, s->config);
        const bool ok = err < 1e-6 * s->config.market_depth && s->seconds < 60.0;
        v.pass = v.pass && ok;
        v.detail += std::string(name) + ": error " + fmt(err, 3) + ", " + fmt(s->seconds, 3) + " s; ";
    }
    return v;
}

// 2 -------------------------------------------------------------------------
Verdict analytic_anchors() {
    const FirstOrderParams p = FirstOrderParams::from(preset("test1").config);
    const double eta = p.eta();
    // root of eta x = 2 / (x - q) by plain bisection
    double lo = p.q + 1e-12, hi = 1e6;
    for (int k = 0; k < 400; ++k) {
        const double mid = 0.5 * (lo + hi);
        (eta * mid - 2.0 / (mid - p.q) > 0.0 ? hi : lo) = mid;
    }
    const double x0 = x0_star(p);
    const double e1 = rel(x0, 0.5 * (lo + hi));

    double e2 = 0.0;
    const FrontierCurve m0 = m0_curve(p, x0_samples(p, 100.0, 0.5));
    for (const auto& [x, y] : m0.points)
        e2 = std::max(e2, std::abs(eta * std::max(x, y) - 1.0 / (x - p.q) - 1.0 / (y - p.q)));

    double e3 = 0.0;
    for (double s : x0_samples(p, 100.0, 0.5)) {
        if (s <= x0) continue;
        const Characteristic f = characteristic_solution(p, s);
        e3 = std::max(e3, std::abs(f(f.l) + f(f.x0)) / std::abs(f(f.l)));
    }
    return {e1 < 1e-9 && e2 < 1e-10 && e3 < 1e-10 && !m0.points.empty(),
            "x0* " + fmt(x0, 12) + " relative error " + fmt(e1, 3) + "; M0 identity " + fmt(e2, 3) +
                " over " + std::to_string(m0.points.size()) + " points; initial condition " + fmt(e3, 3)};
}

// 3 -------------------------------------------------------------------------
Verdict two_class_degeneracy() {
    const auto s = solved("test5");
    double diff = 0.0;
    for (std::size_t k = 0; k < s->eq.values.u[0].data.size(); ++k)
        diff = std::max(diff, std::abs(s->eq.values.u[0].data[k] - s->eq.values.u[1].data[k]));
    const double bound = 10.0 * s->config.solver.tolerance * s->config.fair_price;
    return {diff < bound, "|u1 - u2| " + fmt(diff, 3) + " (bound " + fmt(bound, 3) + ")"};
}

// 4 -------------------------------------------------------------------------
Verdict stationary_correctness() {
    const auto s = solved("test1", 40.0);
    const double res = s->measure.residual(s->gen);
    const StationaryMeasure power = stationary_measure(s->gen, StationaryMethod::PowerIteration);
    const double tv_power = power.total_variation(s->measure);
    SimulationSettings sim;
    sim.events = 1000000;
    sim.seed = 42;
    sim.record_events = false;
    const double tv_sim = simulate(s->gen, s->config, sim).empirical_measure().total_variation(s->measure);
    return {res < 1e-12 && tv_power < 1e-10 && tv_sim < 0.05,
            "test1 on " + std::to_string(s->measure.lattice.n) + "x" + std::to_string(s->measure.lattice.n) +
                ": |mG| " + fmt(res, 3) + ", power TV " + fmt(tv_power, 3) + ", simulation TV " +
                fmt(tv_sim, 3)};
}

// 5 -------------------------------------------------------------------------
Verdict measure_shapes() {
    auto offset = [](std::size_t i, std::size_t j) { return i > j ? i - j : j - i; };
    Verdict v{true, ""};
    {
        const auto s = solved("test1");
        const Lattice lat = s->measure.lattice;
        const std::size_t top = s->measure.argmax();
        const std::size_t i = top / lat.n, j = top % lat.n;
        const std::size_t mirror = lat.index(j, i);
        const auto modes = s->measure.modes();
        const bool ok = i != j && std::find(modes.begin(), modes.end(), mirror) != modes.end() &&
                        rel(s->measure.mass[mirror], s->measure.mass[top]) < 1e-6;
        v.pass = v.pass && ok;
        v.detail += "test1 modes " + node(lat, top) + " and " + node(lat, mirror) + "; ";
    }
    {
        const auto s = solved("test3");
        const Lattice lat = s->measure.lattice;
        const std::size_t top = s->measure.argmax();
        const std::size_t i = top / lat.n, j = top % lat.n;
        const double size = 0.5 * (lat.size(i) + lat.size(j));
        const bool ok = offset(i, j) <= 1 && size >= 5.0 && size <= 15.0;
        v.pass = v.pass && ok;
        v.detail += "test3 mode " + node(lat, top) + "; ";
    }
    {
        const auto s = solved("test5");
        const Lattice lat = s->measure.lattice;
        const std::size_t top = s->measure.argmax();
        const bool ok = offset(top / lat.n, top % lat.n) <= 1;
        v.pass = v.pass && ok;
        v.detail += "test5 mode " + node(lat, top);
    }
    return v;
}

// 6 -------------------------------------------------------------------------
DistanceSummary cp_to_m1(const Solved& s) {
    const FirstOrderParams p = FirstOrderParams::from(s.config);
    const Lattice lat = s.config.lattice();
    const FrontierCurve cp = numeric_cp_curve(s.eq.decisions, s.config);
    const FrontierCurve m1 = m1_curve(p, x0_samples(p, s.config.grid_max, preset("test1").frontier_step),
                                      s.config.grid_max, lat.h / 4.0);
    return boundary_distance(cp, m1, lat.h);
}

Verdict boundary_comparison() {
    const DistanceSummary d1 = cp_to_m1(*solved("test1"));
    const DistanceSummary d2 = cp_to_m1(*solved("test2"));
    return {d2.points > 0 && d1.points > 0 && d2.mean_shares < d1.mean_shares,
            "mean C->P to M1 distance: test2 " + fmt(d2.mean_shares, 4) + " shares (" +
                fmt(d2.mean, 4) + " steps), test1 " + fmt(d1.mean_shares, 4) + " shares (" +
                fmt(d1.mean, 4) + " steps)"};
}

// 7 -------------------------------------------------------------------------
Verdict table_reproduction() {
    const auto t4 = solved("test4");
    const double psi_only = trade_metrics(t4->measure, t4->eq.decisions, t4->config, 0).spread;
    const auto t5 = solved("test5");
    const MarketMetrics m5 = market_metrics(t5->measure, t5->eq.decisions, t5->config);
    const auto t6 = solved("test6");
    const MarketMetrics m6 = market_metrics(t6->measure, t6->eq.decisions, t6->config);

    auto orderings = [&](const MarketMetrics& m) {
        const double ii = m.classes[0].spread, hft = m.classes[1].spread, mix = m.mix.spread;
        return hft < mix && mix < ii && mix < psi_only && ii > psi_only;
    };
    auto within = [](double x, double target) { return std::abs(x - target) <= 0.25 * target; };
    const bool values5 = within(psi_only, 0.248) && within(m5.classes[0].spread, 0.296) &&
                         within(m5.classes[1].spread, 0.038) && within(m5.mix.spread, 0.167);
    const bool values6 = within(m6.classes[0].spread, 0.272) && within(m6.classes[1].spread, 0.052) &&
                         within(m6.mix.spread, 0.162);
    const bool ord5 = orderings(m5), ord6 = orderings(m6);
    return {ord5 && ord6 && values5 && values6,
            "spreads II-only " + fmt(psi_only, 4) + "; test5 II " + fmt(m5.classes[0].spread, 4) +
                " HFT " + fmt(m5.classes[1].spread, 4) + " mix " + fmt(m5.mix.spread, 4) +
                "; test6 II " + fmt(m6.classes[0].spread, 4) + " HFT " + fmt(m6.classes[1].spread, 4) +
                " mix " + fmt(m6.mix.spread, 4) + "; orderings " + (ord5 && ord6 ? "hold" : "violated") +
                ", values " + (values5 && values6 ? "within 25%" : "outside 25%")};
}

// 8 -------------------------------------------------------------------------
Verdict price_levels() {
    const auto t4 = solved("test4");
    const double seller = average_prices(t4->measure, t4->eq.decisions, t4->config, 0).average;
    const auto t5 = solved("test5");
    const double ii = average_prices(t5->measure, t5->eq.decisions, t5->config, 0).average;
    const double hft = average_prices(t5->measure, t5->eq.decisions, t5->config, 1).average;
    return {seller >= 99.85 && seller <= 99.90 && hft > ii,
            "test4 seller average " + fmt(seller, 7) + "; test5 seller average HFT " + fmt(hft, 7) +
                " II " + fmt(ii, 7)};
}

// 9 -------------------------------------------------------------------------
Verdict single_queue_anticipation() {
    const double threshold = 40.0;
    const SingleQueueParams p = SingleQueueParams::step(6.0, 1.0, 3.0, threshold, 1.0, 0.05, 1.0, 150.0);
    const SingleQueueValue sol = solve_single_queue(p);
    const auto [x1, x2] = first_order_switch_points(1.0, 3.0, 1.0, 0.05);
    bool anticipates = false;
    std::string intervals;
    for (const auto& [a, b] : sol.positive_intervals()) {
        intervals += "[" + fmt(a) + "," + fmt(b) + "]";
        if (a < threshold && b >= threshold) anticipates = true;
    }
    const auto switches = sol.sign_switches();
    const bool near = !switches.empty() && std::abs(switches.front() - x1) <= 2.0 * p.order_size;
    return {anticipates && near,
            "positive on " + intervals + "; first switch " +
                (switches.empty() ? std::string("none") : fmt(switches.front())) + " vs x1* " + fmt(x1) +
                ", x2* " + fmt(x2)};
}

// 10 ------------------------------------------------------------------------
Verdict robustness() {
    const auto small = solved("test1");
    const auto large = solved("test1", 2.0 * small->config.grid_max);
    const Lattice ls = small->measure.lattice, ll = large->measure.lattice;
    double tv = 0.0;
    for (std::size_t i = 0; i < ll.n; ++i)
        for (std::size_t j = 0; j < ll.n; ++j) {
            const double a = i < ls.n && j < ls.n ? small->measure(i, j) : 0.0;
            tv += std::abs(a - large->measure(i, j));
        }
    tv *= 0.5;
    const TradeMetrics a = trade_metrics(small->measure, small->eq.decisions, small->config, 0);
    const TradeMetrics b = trade_metrics(large->measure, large->eq.decisions, large->config, 0);
    const double metrics = std::max({rel(a.sell.average, b.sell.average), rel(a.buy.average, b.buy.average),
                                     rel(a.spread, b.spread), rel(a.effective_spread, b.effective_spread),
                                     rel(a.sell.lc_volume, b.sell.lc_volume)});

    const MarketConfig cfg = small->config;
    double init = 0.0;
    for (double shift : {-0.1, 0.1}) {
        const Equilibrium eq = solve_equilibrium(cfg, ValueField::constant(cfg, cfg.fair_price + shift));
        for (std::size_t k = 0; k < eq.values.u[0].data.size(); ++k)
            init = std::max({init, std::abs(eq.values.u[0].data[k] - small->eq.values.u[0].data[k]),
                             std::abs(eq.values.v[0].data[k] - small->eq.values.v[0].data[k])});
    }
    const double bound = 10.0 * cfg.solver.tolerance * cfg.fair_price;
    return {tv < 1e-6 && metrics < 1e-6 && init < bound,
            "Q_max " + fmt(cfg.grid_max) + " -> " + fmt(2.0 * cfg.grid_max) + ": measure TV " + fmt(tv, 3) +
                ", metrics relative " + fmt(metrics, 3) + "; initial value shift +-0.1: " + fmt(init, 3) +
                " (bound " + fmt(bound, 3) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
        {"antisymmetry and runtime", antisymmetry_suite},
        {"analytic anchors", analytic_anchors},
        {"two-class degeneracy", two_class_degeneracy},
        {"stationary correctness", stationary_correctness},
        {"measure shapes", measure_shapes},
        {"boundary comparison", boundary_comparison},
        {"spread table reproduction", table_reproduction},
        {"price levels", price_levels},
        {"single-queue anticipation", single_queue_anticipation},
        {"robustness", robustness},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        Verdict v;
        try {
            v = criteria[k].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                    v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return strict ? failed : 0;
}
