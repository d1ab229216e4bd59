#include <doctest.h>

#include "lobmfg/markov.hpp"

#include <cmath>

using namespace lobmfg;

namespace {

MarketConfig test1() {
    MarketConfig cfg;
    cfg.grid_max = 40.0;
    cfg.classes = {{"II", 1.0, 1.0, 0.2, 2.5e-3}};
    return cfg;
}

// Sellers provide when the ask queue is not longer than the bid queue, buyers mirror.
DecisionField synthetic(const MarketConfig& cfg) {
    DecisionField d = DecisionField::filled(cfg, 0.0);
    const std::size_t n = d.lattice.n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            d.sell[0](i, j) = i <= j ? 1.0 : 0.0;
            d.buy[0](i, j) = j <= i ? 1.0 : 0.0;
        }
    return apply_boundary(d, cfg);
}

}  // namespace

TEST_CASE("generator rows: rates and targets") {
    const MarketConfig cfg = test1();
    const JumpGenerator gen = build_generator(synthetic(cfg), cfg);
    const Lattice lat = gen.lattice;
    // interior node on the diagonal: both sides provide
    const auto& row = gen.rows[lat.index(10, 10)];
    double lp_sell = 0, lc_sell = 0, lp_buy = 0, lc_buy = 0;
    for (const auto& t : row) {
        if (t.kind == EventKind::LpSell) { lp_sell += t.rate; CHECK(t.target == lat.index(11, 10)); }
        if (t.kind == EventKind::LcSell) { lc_sell += t.rate; CHECK(t.target == lat.index(10, 9)); }
        if (t.kind == EventKind::LpBuy) { lp_buy += t.rate; CHECK(t.target == lat.index(10, 11)); }
        if (t.kind == EventKind::LcBuy) { lc_buy += t.rate; CHECK(t.target == lat.index(9, 10)); }
    }
    CHECK(lp_sell == doctest::Approx(1.0));
    CHECK(lc_sell == doctest::Approx(0.2));
    CHECK(lp_buy == doctest::Approx(1.0));
    CHECK(lc_buy == doctest::Approx(0.2));
    CHECK(gen.total_rate(lat.index(10, 10)) == doctest::Approx(2.4));
    // the smallest state cannot shrink
    for (const auto& t : gen.rows[0]) CHECK((t.kind == EventKind::LpSell || t.kind == EventKind::LpBuy));
    CHECK(gen.max_rate() <= 2.4 + 1e-12);
}

TEST_CASE("direct stationary measure matches the dense reference solve") {
    const MarketConfig cfg = test1();
    const JumpGenerator gen = build_generator(synthetic(cfg), cfg);
    const StationaryMeasure m = stationary_measure(gen);
    double total = 0.0;
    for (double x : m.mass) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.residual(gen) < 1e-12);
    CHECK(m(0, 0) == doctest::Approx(8.211088037785263e-07).epsilon(1e-8));
    CHECK(m(4, 4) == doctest::Approx(0.00036462887121981925).epsilon(1e-8));
    CHECK(m(9, 2) == doctest::Approx(0.0020743217761537295).epsilon(1e-8));
    CHECK(m(19, 19) == doctest::Approx(0.0005193236079869296).epsilon(1e-8));
    CHECK(m(39, 0) == doctest::Approx(0.005393891721953135).epsilon(1e-8));
}

TEST_CASE("stationary measure is symmetric for symmetric decisions") {
    const MarketConfig cfg = test1();
    const JumpGenerator gen = build_generator(synthetic(cfg), cfg);
    const StationaryMeasure m = stationary_measure(gen);
    const std::size_t n = m.lattice.n;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
    CHECK(worst < 1e-8);
}

TEST_CASE("power iteration agrees with the direct solve") {
    const MarketConfig cfg = test1();
    const JumpGenerator gen = build_generator(synthetic(cfg), cfg);
    const StationaryMeasure direct = stationary_measure(gen);
    const StationaryMeasure power = stationary_measure(gen, StationaryMethod::PowerIteration);
    CHECK(direct.total_variation(power) < 1e-10);
}

TEST_CASE("uniformized rows are stochastic") {
    const MarketConfig cfg = test1();
    const JumpGenerator gen = build_generator(synthetic(cfg), cfg);
    const auto rows = uniformized_rows(gen);
    for (const auto& row : rows) {
        double s = 0.0;
        for (const auto& [t, p] : row) {
            CHECK(p >= 0.0);
            s += p;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("simulation is reproducible and converges to the measure") {
    const MarketConfig cfg = test1();
    const JumpGenerator gen = build_generator(synthetic(cfg), cfg);
    SimulationSettings s;
    s.events = 20000;
    const Trajectory a = simulate(gen, cfg, s);
    const Trajectory b = simulate(gen, cfg, s);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t k = 0; k < a.events.size(); k += 997) {
        CHECK(a.events[k].time == b.events[k].time);
        CHECK(a.events[k].i == b.events[k].i);
        CHECK(a.events[k].j == b.events[k].j);
    }
    s.seed = 7;
    const Trajectory c = simulate(gen, cfg, s);
    CHECK(c.horizon != a.horizon);

    for (const auto& e : a.events) {
        const bool consumes = e.kind == EventKind::LcSell || e.kind == EventKind::LcBuy;
        CHECK(std::isnan(e.price) != consumes);
        if (consumes) {
            CHECK(e.price >= cfg.fair_price - cfg.market_depth);
            CHECK(e.price <= cfg.fair_price + cfg.market_depth);
        }
    }

    s.events = 1000000;
    s.record_events = false;
    s.seed = 42;
    const Trajectory longer = simulate(gen, cfg, s);
    CHECK(longer.events.empty());
    const StationaryMeasure exact = stationary_measure(gen);
    CHECK(longer.empirical_measure().total_variation(exact) < 0.05);
}

TEST_CASE("modes and argmax") {
    MarketConfig cfg = test1();
    StationaryMeasure m{cfg.lattice(), std::vector<double>(cfg.lattice().count(), 0.0)};
    m.mass[m.lattice.index(5, 20)] = 0.5;
    m.mass[m.lattice.index(20, 5)] = 0.4;
    m.mass[m.lattice.index(21, 5)] = 0.1;
    const auto modes = m.modes();
    CHECK(modes.size() == 2);
    CHECK(m.argmax() == m.lattice.index(5, 20));
}

TEST_CASE("a chain without return to the smallest state is rejected") {
    MarketConfig cfg = test1();
    cfg.classes[0].nonsor_intensity = 0.0;
    // everyone provides: queues only grow until the cap forces consumption
    const DecisionField d = apply_boundary(DecisionField::filled(cfg, 1.0), cfg);
    const JumpGenerator gen = build_generator(d, cfg);
    CHECK_THROWS_AS(recurrent_support(gen), DomainError);
}
