#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lobmfg {

/** Raised when a price or indicator is evaluated outside its domain. */
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/** Raised for invalid parameters or configuration documents. */
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/** Raised when an iterative solver fails; carries its last diagnostics. */
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double residual, std::size_t iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
    double residual() const { return residual_; }
    std::size_t iterations() const { return iterations_; }

private:
    double residual_;
    std::size_t iterations_;
};

struct AgentClass {
    std::string label;
    double order_size = 1.0;        // q
    double sor_intensity = 1.0;     // lambda
    double nonsor_intensity = 0.0;  // lambda^-
    double waiting_cost = 0.0;      // c, per share and unit time

    double total_intensity() const { return sor_intensity + nonsor_intensity; }
    void validate() const;
};

struct SolverSettings {
    double tolerance = 1e-9;         // relative to the fair price
    std::size_t max_iterations = 10000;
    double relaxation = 0.5;
    std::size_t cycle_window = 12;   // outer steps of recurring decisions before mixing
};

/**
 * Square lattice {h, 2h, ..., n h}^2. Index i addresses the ask queue,
 * index j the bid queue.
 */
struct Lattice {
    double h = 1.0;
    std::size_t n = 0;

    double size(std::size_t i) const { return h * static_cast<double>(i + 1); }
    std::size_t index(std::size_t i, std::size_t j) const { return i * n + j; }
    std::size_t count() const { return n * n; }
    double max_size() const { return size(n - 1); }
    bool operator==(const Lattice&) const = default;
};

/// Greatest common divisor of positive sizes, up to a relative tolerance.
double size_gcd(const std::vector<double>& sizes);

struct MarketConfig {
    double fair_price = 100.0;
    double market_depth = 2.0;
    double grid_max = 0.0;
    std::vector<AgentClass> classes;
    SolverSettings solver;

    double grid_step() const;
    Lattice lattice() const;
    /// Order size of class c in lattice steps.
    std::size_t steps(std::size_t c) const;
    double max_order_size() const;
    void validate() const;
};

double buy_price(double ask_size, double q, double fair_price, double depth);
double sell_price(double bid_size, double q, double fair_price, double depth);

/** Dense lattice array indexed as (ask index, bid index). */
struct Grid {
    std::size_t n = 0;
    std::vector<double> data;

    Grid() = default;
    Grid(std::size_t n_, double fill) : n(n_), data(n_ * n_, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

struct ValueField {
    Lattice lattice;
    std::vector<Grid> u;  // seller value per class
    std::vector<Grid> v;  // buyer value per class

    static ValueField constant(const MarketConfig& config, double value);
};

/** One-class region: first sign for sellers, second for buyers. */
enum class Region { PlusPlus, PlusMinus, MinusPlus, MinusMinus };

std::string region_name(Region r);
Region make_region(bool lp_sell, bool lp_buy);

/**
 * Routing decisions per class. Entries hold the probability of routing to
 * the book (LP); pure decisions are 0 or 1. A value strictly between 0 and
 * 1 only appears at nodes where the order is exactly indifferent.
 */
struct DecisionField {
    Lattice lattice;
    std::vector<Grid> sell;
    std::vector<Grid> buy;

    static DecisionField filled(const MarketConfig& config, double value);

    bool lp_sell(std::size_t c, std::size_t i, std::size_t j) const { return sell[c](i, j) > 0.5; }
    bool lp_buy(std::size_t c, std::size_t i, std::size_t j) const { return buy[c](i, j) > 0.5; }
    Region region(std::size_t c, std::size_t i, std::size_t j) const;
    /// Combined two-class region 1..9, or 0 for a pair outside that list.
    int combined_region(std::size_t i, std::size_t j) const;
    std::size_t mixed_count() const;
};

int combined_region(Region first, Region second);

bool lp_buy_indicator(const Grid& v, const MarketConfig& config, std::size_t c, std::size_t i,
                      std::size_t j_shifted);
bool lp_sell_indicator(const Grid& u, const MarketConfig& config, std::size_t c,
                       std::size_t i_shifted, std::size_t j);

bool floor_forced(const MarketConfig& config, std::size_t c, std::size_t i, std::size_t j);
DecisionField apply_boundary(DecisionField decisions, const MarketConfig& config);

}  // namespace lobmfg
