#pragma once

#include "lobmfg/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lobmfg {

/** A single routing choice: the sell or buy decision of class c at (i, j). */
struct Indicator {
    bool sell = true;
    std::size_t c = 0;
    std::size_t i = 0;
    std::size_t j = 0;
};

std::string describe(const Indicator& ind, const Lattice& lattice);

/** Raised when the decision field keeps oscillating and cannot be resolved. */
class LimitCycleError : public SolverError {
public:
    LimitCycleError(const std::string& what, double residual, std::size_t iterations,
                    std::vector<Indicator> states)
        : SolverError(what, residual, iterations), states_(std::move(states)) {}
    const std::vector<Indicator>& states() const { return states_; }

private:
    std::vector<Indicator> states_;
};

struct EquilibriumDiagnostics {
    std::size_t outer_iterations = 0;
    double value_residual = 0.0;        // last outer-step sup-norm change
    bool oscillation_detected = false;  // decisions kept flipping in the outer loop
    std::size_t newton_iterations = 0;
    std::size_t mixed_indicators = 0;   // indicators left strictly inside (0, 1)
    double complementarity_residual = 0.0;
    double balance_residual = 0.0;      // raw stationary equation, sup over nodes
};

struct Equilibrium {
    ValueField values;
    DecisionField decisions;
    EquilibriumDiagnostics diagnostics;
};

/** One Jacobi sweep of the seller equation of class ci with frozen decisions. */
Grid update_u(const ValueField& values, const DecisionField& decisions,
              const MarketConfig& config, std::size_t ci);
/** One Jacobi sweep with decisions evaluated from the current values. */
Grid update_u(const ValueField& values, const MarketConfig& config, std::size_t ci);
Grid update_v(const ValueField& values, const DecisionField& decisions,
              const MarketConfig& config, std::size_t ci);
Grid update_v(const ValueField& values, const MarketConfig& config, std::size_t ci);

/** Exact values of every class for a frozen (possibly mixed) decision field. */
ValueField solve_values(const DecisionField& decisions, const MarketConfig& config);

/** Pure routing decisions implied by the values, boundary rules applied. */
DecisionField extract_decisions(const ValueField& values, const MarketConfig& config);

/** Gain from providing liquidity; the decision is LP iff the gain is positive. */
double decision_gap(const ValueField& values, const MarketConfig& config, const Indicator& ind);
bool is_free(const MarketConfig& config, const Indicator& ind);

/** Sup-norm of the stationary balance equations for the given fields. */
double balance_residual(const ValueField& values, const DecisionField& decisions,
                        const MarketConfig& config);

/** max |(u(x,y) - P) + (v(y,x) - P)| for class c. */
double antisymmetry_error(const ValueField& values, const MarketConfig& config, std::size_t c = 0);

Equilibrium solve_equilibrium(const MarketConfig& config,
                              const std::optional<ValueField>& initial = std::nullopt);

}  // namespace lobmfg
