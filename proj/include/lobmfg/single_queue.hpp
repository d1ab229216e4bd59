#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace lobmfg {

/** How a market order of size q fills a queue of size x. */
enum class MatchingRule {
    ProRata,           // every resting order receives the fraction q/x
    RandomizedFullFill // one order is filled entirely, with probability q/x each
};

/** One-sided queue: sellers arrive at rate lambda, buyers consume at rate mu(x). */
struct SingleQueueParams {
    double arrival_intensity = 1.0;             // lambda
    std::function<double(double)> service;      // mu(x)
    std::function<double(double)> payoff;       // P(x)
    double waiting_cost = 0.01;                 // c
    double order_size = 1.0;                    // q
    double x_max = 100.0;
    MatchingRule rule = MatchingRule::ProRata;

    double tolerance = 1e-9;
    double relaxation = 0.5;
    std::size_t max_iterations = 1000000;
    // Starting value; by default the largest payoff, which makes the damped
    // iteration decrease towards the largest equilibrium.
    std::optional<double> initial_value;

    /** Sizes q, 2q, ..., x_max. */
    std::size_t count() const;
    double size(std::size_t k) const { return order_size * static_cast<double>(k + 1); }
    /** Largest mu over the grid. */
    double max_service() const;
    double max_payoff() const;
    double start_value() const { return initial_value ? *initial_value : max_payoff(); }
    void validate() const;

    /** Service mu1 below the threshold S and mu2 from S on, constant payoff. */
    static SingleQueueParams step(double lambda, double mu1, double mu2, double threshold,
                                  double payoff, double cost, double q, double x_max);
};

struct SingleQueueValue {
    double q = 1.0;
    std::vector<double> u;      // u[k] is the value at x = (k + 1) q
    std::vector<double> entry;  // probability that an arrival joins at x; fractional at indifference points
    std::size_t iterations = 0;
    double residual = 0.0;

    double size(std::size_t k) const { return q * static_cast<double>(k + 1); }
    /** Queue sizes x at which u(x) > 0 while u(x - q) <= 0, or the reverse. */
    std::vector<double> sign_switches() const;
    /** Maximal runs [first, last] of sizes with u > 0. */
    std::vector<std::pair<double, double>> positive_intervals() const;
};

/** Queue-position dependent values u(z, x) for FIFO priority, q <= z <= x. */
struct FifoValue {
    double q = 1.0;
    std::size_t n = 0;
    std::vector<double> data;  // row-major (z, x), entries with z > x unused
    std::size_t iterations = 0;
    double residual = 0.0;

    double operator()(std::size_t z, std::size_t x) const { return data[z * n + x]; }
    double& operator()(std::size_t z, std::size_t x) { return data[z * n + x]; }
};

/** One application of the stationary queue equation (undamped). */
std::vector<double> single_queue_map(const SingleQueueParams& params, const std::vector<double>& u);

SingleQueueValue solve_single_queue(const SingleQueueParams& params);

/** x1* = mu1 p / c and x2* = mu2 p / c. */
std::pair<double, double> first_order_switch_points(double mu1, double mu2, double payoff,
                                                    double cost);

/** Root of c x = mu P(x) on (0, x_max], located by bisection. */
double first_order_switch_point(double mu, const std::function<double(double)>& payoff,
                                double cost, double x_max);

FifoValue solve_fifo(const SingleQueueParams& params);

}  // namespace lobmfg
