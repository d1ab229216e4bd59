#include <doctest.h>

#include "lobmfg/model.hpp"

using namespace lobmfg;

namespace {

MarketConfig one_class(double grid_max = 40.0) {
    MarketConfig cfg;
    cfg.grid_max = grid_max;
    cfg.classes = {{"II", 1.0, 1.0, 0.2, 2.5e-3}};
    return cfg;
}

}  // namespace

TEST_CASE("transaction prices follow the impact formula") {
    CHECK(buy_price(5.0, 1.0, 100.0, 2.0) == doctest::Approx(100.5));
    CHECK(sell_price(5.0, 1.0, 100.0, 2.0) == doctest::Approx(99.5));
    CHECK(buy_price(2.0, 1.0, 100.0, 2.0) == doctest::Approx(102.0));
    CHECK_THROWS_AS(buy_price(1.0, 1.0, 100.0, 2.0), DomainError);
    CHECK_THROWS_AS(sell_price(0.5, 1.0, 100.0, 2.0), DomainError);
}

TEST_CASE("prices are monotone and symmetric about the fair price") {
    double last_buy = 1e300, last_sell = -1e300;
    for (double Q = 1.25; Q <= 60.0; Q += 0.25) {
        const double b = buy_price(Q, 1.0, 100.0, 2.0);
        const double s = sell_price(Q, 1.0, 100.0, 2.0);
        CHECK(b < last_buy);
        CHECK(s > last_sell);
        CHECK(b - 100.0 == doctest::Approx(100.0 - s));
        last_buy = b;
        last_sell = s;
    }
}

TEST_CASE("grid step is the common divisor of the order sizes") {
    CHECK(size_gcd({1.0, 0.25}) == doctest::Approx(0.25));
    CHECK(size_gcd({0.75, 0.5}) == doctest::Approx(0.25));
    CHECK(size_gcd({2.0}) == doctest::Approx(2.0));
    MarketConfig cfg = one_class();
    cfg.classes.push_back({"HFT", 0.25, 4.0, 0.0, 1e-2});
    const Lattice lat = cfg.lattice();
    CHECK(lat.h == doctest::Approx(0.25));
    CHECK(lat.n == 160);
    CHECK(cfg.steps(0) == 4);
    CHECK(cfg.steps(1) == 1);
    CHECK(lat.size(0) == doctest::Approx(0.25));
    CHECK(lat.max_size() == doctest::Approx(40.0));
    CHECK(lat.index(2, 3) == 2 * 160 + 3);
}

TEST_CASE("configuration validation rejects invalid documents") {
    CHECK_NOTHROW(one_class().validate());

    MarketConfig cfg = one_class();
    cfg.classes[0].waiting_cost = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = one_class();
    cfg.classes[0].sor_intensity = 0.0;
    cfg.classes[0].nonsor_intensity = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = one_class(30.0);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = one_class();
    cfg.fair_price = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = one_class();
    cfg.classes.push_back({"odd", 1.0 / 3.14159, 1.0, 0.2, 1e-2});
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("greatest common divisor"), ConfigError);

    cfg = one_class(40.5);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = one_class();
    cfg.solver.relaxation = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("region labels") {
    CHECK(make_region(true, true) == Region::PlusPlus);
    CHECK(make_region(true, false) == Region::PlusMinus);
    CHECK(make_region(false, true) == Region::MinusPlus);
    CHECK(make_region(false, false) == Region::MinusMinus);
    CHECK(region_name(Region::PlusMinus) == "R+-");

    using R = Region;
    CHECK(combined_region(R::PlusPlus, R::PlusPlus) == 1);
    CHECK(combined_region(R::PlusPlus, R::MinusMinus) == 2);
    CHECK(combined_region(R::MinusMinus, R::MinusMinus) == 3);
    CHECK(combined_region(R::PlusPlus, R::MinusPlus) == 4);
    CHECK(combined_region(R::MinusPlus, R::PlusMinus) == 5);
    CHECK(combined_region(R::MinusPlus, R::MinusMinus) == 6);
    CHECK(combined_region(R::PlusPlus, R::PlusMinus) == 7);
    CHECK(combined_region(R::PlusMinus, R::PlusMinus) == 8);
    CHECK(combined_region(R::PlusMinus, R::MinusMinus) == 9);
    CHECK(combined_region(R::MinusMinus, R::PlusPlus) == 0);
}

TEST_CASE("boundary rules force providing at the floor and consuming at the cap") {
    MarketConfig cfg = one_class();
    cfg.classes.push_back({"HFT", 0.25, 4.0, 0.0, 1e-2});
    const DecisionField d = apply_boundary(DecisionField::filled(cfg, 0.0), cfg);
    const std::size_t n = d.lattice.n;
    // class 0 has order size 4 steps
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(d.sell[0](i, 50) == 1.0);
        CHECK(d.buy[0](50, i) == 1.0);
        CHECK(floor_forced(cfg, 0, i, 50));
    }
    CHECK(d.sell[0](4, 50) == 0.0);
    CHECK(d.sell[1](1, 50) == 0.0);
    CHECK(d.sell[1](0, 50) == 1.0);

    const DecisionField up = apply_boundary(DecisionField::filled(cfg, 1.0), cfg);
    CHECK(up.sell[0](n - 4, 10) == 0.0);
    CHECK(up.sell[0](n - 5, 10) == 1.0);
    CHECK(up.buy[0](10, n - 4) == 0.0);
    CHECK(up.sell[1](n - 1, 10) == 0.0);
    CHECK(up.sell[1](n - 2, 10) == 1.0);
    // the cap wins over the floor
    CHECK(up.sell[0](n - 1, 0) == 0.0);
    CHECK(up.buy[0](0, n - 1) == 0.0);
}

TEST_CASE("decision field accessors") {
    MarketConfig cfg = one_class();
    DecisionField d = DecisionField::filled(cfg, 1.0);
    d.buy[0](3, 4) = 0.0;
    d.sell[0](5, 5) = 0.5;
    CHECK(d.region(0, 3, 4) == Region::PlusMinus);
    CHECK(d.mixed_count() == 1);
    CHECK_FALSE(d.lp_sell(0, 5, 5));
    CHECK(d.combined_region(3, 4) == 0);
}
