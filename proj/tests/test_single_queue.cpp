#include <doctest.h>

#include "lobmfg/model.hpp"
#include "lobmfg/single_queue.hpp"

#include <cmath>

using namespace lobmfg;

namespace {

SingleQueueParams constant_service() {
    SingleQueueParams p;
    p.arrival_intensity = 3.0;
    p.service = [](double) { return 1.0; };
    p.payoff = [](double) { return 1.0; };
    p.waiting_cost = 0.05;
    p.order_size = 1.0;
    p.x_max = 30.0;
    return p;
}

}  // namespace

TEST_CASE("constant service: values match the reference iteration") {
    const SingleQueueValue v = solve_single_queue(constant_service());
    REQUIRE(v.u.size() == 30);
    CHECK(v.u[0] == doctest::Approx(0.6025391798046225).epsilon(1e-8));
    CHECK(v.u[4] == doctest::Approx(0.2720678422196123).epsilon(1e-8));
    CHECK(v.u[9] == doctest::Approx(0.09968312383993745).epsilon(1e-8));
    CHECK(v.u[18] == doctest::Approx(0.001871321632070278).epsilon(1e-7));
    CHECK(std::abs(v.u[19]) < 1e-8);
    CHECK(v.u[20] == doctest::Approx(-0.0023809523809523864).epsilon(1e-7));
    CHECK(v.u[24] == doctest::Approx(-0.03).epsilon(1e-8));
    CHECK(v.residual < 1e-9);
}

TEST_CASE("the solved values are a fixed point of the queue equation") {
    const SingleQueueParams p = constant_service();
    const SingleQueueValue v = solve_single_queue(p);
    const auto mapped = single_queue_map(p, v.u);
    for (std::size_t k = 0; k < v.u.size(); ++k) CHECK(mapped[k] == doctest::Approx(v.u[k]).epsilon(1e-7));
}

TEST_CASE("first-order switch points") {
    const auto [x1, x2] = first_order_switch_points(1.0, 3.0, 1.0, 0.05);
    CHECK(x1 == doctest::Approx(20.0));
    CHECK(x2 == doctest::Approx(60.0));
    const double root = first_order_switch_point(
        2.0, [](double x) { return 1.0 + 10.0 / x; }, 0.1, 500.0);
    // c x = mu (1 + 10/x)  <=>  0.1 x^2 - 2 x - 20 = 0
    CHECK(root == doctest::Approx(10.0 + std::sqrt(300.0)).epsilon(1e-9));
}

TEST_CASE("step service: anticipation interval starts below the threshold") {
    const auto p = SingleQueueParams::step(6.0, 1.0, 3.0, 40.0, 1.0, 0.05, 1.0, 150.0);
    const SingleQueueValue v = solve_single_queue(p);
    const auto intervals = v.positive_intervals();
    REQUIRE(intervals.size() == 2);
    CHECK(intervals[0].first == doctest::Approx(1.0));
    CHECK(intervals[0].second == doctest::Approx(20.0));
    CHECK(intervals[1].first == doctest::Approx(28.0));
    CHECK(intervals[1].second == doctest::Approx(60.0));
    CHECK(intervals[1].first < 40.0);
    const auto switches = v.sign_switches();
    REQUIRE_FALSE(switches.empty());
    const double x1 = first_order_switch_points(1.0, 3.0, 1.0, 0.05).first;
    CHECK(std::abs(switches.front() - x1) <= 2.0);
}

TEST_CASE("randomized full fill has the same expected payoff as pro rata") {
    SingleQueueParams a = constant_service();
    SingleQueueParams b = constant_service();
    b.rule = MatchingRule::RandomizedFullFill;
    const auto va = solve_single_queue(a), vb = solve_single_queue(b);
    for (std::size_t k = 0; k < va.u.size(); ++k) CHECK(va.u[k] == doctest::Approx(vb.u[k]));
}

TEST_CASE("values are nonincreasing in queue size for constant service") {
    const SingleQueueValue v = solve_single_queue(constant_service());
    for (std::size_t k = 1; k < v.u.size(); ++k) CHECK(v.u[k] <= v.u[k - 1] + 1e-12);
}

TEST_CASE("entry probabilities lie in [0, 1]") {
    const auto p = SingleQueueParams::step(6.0, 1.0, 3.0, 40.0, 1.0, 0.05, 1.0, 150.0);
    const SingleQueueValue v = solve_single_queue(p);
    for (double e : v.entry) {
        CHECK(e >= 0.0);
        CHECK(e <= 1.0);
    }
}

TEST_CASE("invalid single queue parameters") {
    SingleQueueParams p = constant_service();
    p.arrival_intensity = 0.5;
    CHECK_THROWS_AS(solve_single_queue(p), ConfigError);
    p = constant_service();
    p.x_max = 30.5;
    CHECK_THROWS_AS(solve_single_queue(p), ConfigError);
    p = constant_service();
    p.waiting_cost = 0.0;
    CHECK_THROWS_AS(solve_single_queue(p), ConfigError);
    CHECK_THROWS_AS(SingleQueueParams::step(6.0, 3.0, 1.0, 40.0, 1.0, 0.05, 1.0, 150.0), ConfigError);
}

TEST_CASE("FIFO values: the front of the queue is worth the most") {
    SingleQueueParams p = constant_service();
    p.x_max = 20.0;
    const FifoValue f = solve_fifo(p);
    REQUIRE(f.n == 20);
    CHECK(f.residual < 1e-8);
    for (std::size_t x = 1; x < f.n; ++x)
        for (std::size_t z = 1; z <= x; ++z) CHECK(f(z, x) <= f(z - 1, x) + 1e-12);
}
