#pragma once

#include "lobmfg/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lobmfg {

enum class EventKind : std::uint8_t { LpSell, LcSell, LpBuy, LcBuy };
std::string event_name(EventKind kind);

struct Transition {
    std::size_t target = 0;
    double rate = 0.0;
    EventKind kind = EventKind::LpSell;
    std::size_t cls = 0;
};

/**
 * Continuous-time jump process on the lattice states (flat index i * n + j).
 * Events that would leave the lattice are dropped; the diagonal of the
 * generator is minus the total outflow.
 */
struct JumpGenerator {
    Lattice lattice;
    std::vector<std::vector<Transition>> rows;

    std::size_t states() const { return rows.size(); }
    double total_rate(std::size_t s) const;
    double max_rate() const;
};

JumpGenerator build_generator(const DecisionField& decisions, const MarketConfig& config);

/** States reachable from the minimal state; throws if the chain has another closed class. */
std::vector<bool> recurrent_support(const JumpGenerator& gen);

struct StationaryMeasure {
    Lattice lattice;
    std::vector<double> mass;  // flat index i * n + j

    double operator()(std::size_t i, std::size_t j) const { return mass[lattice.index(i, j)]; }
    /** sum_s |(m G)_s|. */
    double residual(const JumpGenerator& gen) const;
    double total_variation(const StationaryMeasure& other) const;
    /** Flat indices of strict local maxima over the 8-neighbourhood. */
    std::vector<std::size_t> modes(double min_mass = 0.0) const;
    std::size_t argmax() const;
};

enum class StationaryMethod { Direct, PowerIteration };

struct PowerIterationSettings {
    double tolerance = 1e-12;  // estimated l1 distance to the fixed point
    std::size_t max_iterations = 50000000;
};

StationaryMeasure stationary_measure(const JumpGenerator& gen,
                                     StationaryMethod method = StationaryMethod::Direct,
                                     const PowerIterationSettings& settings = {});

/** Transition matrix of the uniformized chain (rate max_rate()), as rows. */
std::vector<std::vector<std::pair<std::size_t, double>>> uniformized_rows(const JumpGenerator& gen);

struct TrajectoryEvent {
    double time = 0.0;
    std::uint32_t i = 0;  // state after the event
    std::uint32_t j = 0;
    EventKind kind = EventKind::LpSell;
    std::uint8_t cls = 0;
    double price = 0.0;  // transaction price, NaN for insertions
};

struct Trajectory {
    Lattice lattice;
    std::uint32_t start_i = 0, start_j = 0;
    std::vector<TrajectoryEvent> events;
    std::vector<double> occupancy;  // time spent in each state
    std::vector<std::uint64_t> visits;
    double horizon = 0.0;

    /** Time-weighted empirical measure. */
    StationaryMeasure empirical_measure() const;
};

struct SimulationSettings {
    std::uint64_t events = 100000;
    std::uint64_t seed = 42;
    bool record_events = true;
    std::size_t start = 0;  // flat index of the initial state
};

Trajectory simulate(const JumpGenerator& gen, const MarketConfig& config, const SimulationSettings& settings);

}  // namespace lobmfg
