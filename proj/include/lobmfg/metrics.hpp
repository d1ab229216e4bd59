#pragma once

#include "lobmfg/markov.hpp"
#include "lobmfg/model.hpp"

#include <array>
#include <vector>

namespace lobmfg {

enum class Side { Sell, Buy };

/**
 * Class shares of the resting volume (gamma) and per-class rates of the
 * consuming flow that hits that volume (xi, without the q_j / Q factor),
 * for every combined region. With one class the four single-class regions
 * are stored under labels 1..4 in the order ++, +-, -+, --.
 */
struct RegionEntry {
    std::vector<double> gamma;
    std::vector<double> xi_rate;
};

struct RegionTable {
    std::size_t classes = 0;
    std::vector<RegionEntry> entries;  // entries[label - 1]

    static RegionTable build(const MarketConfig& config, Side side = Side::Sell);
    const RegionEntry& at(int label) const;
};

/** Region label of a node for the table built with the same number of classes. */
int table_label(const DecisionField& decisions, std::size_t i, std::size_t j);

struct SideMetrics {
    double lc_volume = 0.0;  // M^-
    double lp_volume = 0.0;  // M^+
    double lc_price = 0.0;   // p^-
    double lp_price = 0.0;   // p^+
    double average = 0.0;    // p
};

struct TradeMetrics {
    SideMetrics sell;
    SideMetrics buy;
    double spread = 0.0;            // psi = E[p buy] - E[p sell] on the blended averages
    double spread_bps = 0.0;
    double lc_spread = 0.0;         // same difference on consumer prices only
    double effective_spread = 0.0;  // psi^e
};

/** Per-class metrics plus the simple mean over classes ("mix"). */
struct MarketMetrics {
    std::vector<TradeMetrics> classes;
    TradeMetrics mix;
};

double lc_volume(const StationaryMeasure& measure, const DecisionField& decisions,
                 const MarketConfig& config, std::size_t c, Side side = Side::Sell);
double lp_volume(const StationaryMeasure& measure, const DecisionField& decisions,
                 const MarketConfig& config, std::size_t c, Side side = Side::Sell);

SideMetrics average_prices(const StationaryMeasure& measure, const DecisionField& decisions,
                           const MarketConfig& config, std::size_t c, Side side = Side::Sell);

double expected_spread(const SideMetrics& sell, const SideMetrics& buy);

double effective_spread(const StationaryMeasure& measure, const DecisionField& decisions,
                        const MarketConfig& config, std::size_t c);

TradeMetrics trade_metrics(const StationaryMeasure& measure, const DecisionField& decisions,
                           const MarketConfig& config, std::size_t c);

MarketMetrics market_metrics(const StationaryMeasure& measure, const DecisionField& decisions,
                             const MarketConfig& config);

/** Expected share flows into and out of each queue under the measure. */
struct QueueFlow {
    double ask_insertion = 0.0;
    double ask_consumption = 0.0;
    double bid_insertion = 0.0;
    double bid_consumption = 0.0;
};

QueueFlow queue_flow(const StationaryMeasure& measure, const JumpGenerator& gen,
                     const MarketConfig& config);

}  // namespace lobmfg
