#include "lobmfg/metrics.hpp"

#include <cmath>
#include <limits>

namespace lobmfg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool provides(Region r, Side side) {
    if (side == Side::Sell) return r == Region::PlusPlus || r == Region::PlusMinus;
    return r == Region::PlusPlus || r == Region::MinusPlus;
}

RegionEntry entry_for(const std::vector<Region>& regions, const MarketConfig& config, Side side) {
    const Side other = side == Side::Sell ? Side::Buy : Side::Sell;
    RegionEntry e;
    double total = 0.0;
    for (std::size_t c = 0; c < regions.size(); ++c)
        if (provides(regions[c], side)) total += config.classes[c].sor_intensity;
    for (std::size_t c = 0; c < regions.size(); ++c) {
        const auto& cls = config.classes[c];
        const bool lp = provides(regions[c], side);
        e.gamma.push_back(lp && total > 0.0 ? cls.sor_intensity / total : 0.0);
        // the opposite side of every class consumes this queue
        e.xi_rate.push_back(provides(regions[c], other) ? cls.nonsor_intensity
                                                        : cls.total_intensity());
    }
    return e;
}

void check_shapes(const StationaryMeasure& measure, const DecisionField& decisions,
                  const MarketConfig& config, std::size_t c) {
    if (!(measure.lattice == decisions.lattice) || measure.mass.size() != decisions.lattice.count())
        throw DomainError("measure and decisions live on different lattices");
    if (!(decisions.lattice == config.lattice()))
        throw DomainError("decisions do not match the configured lattice");
    if (c >= config.classes.size() || c >= decisions.sell.size())
        throw DomainError("class index out of range");
}

/**
 * Node view with the roles of the queues exchanged on the buy side: "own" is
 * the queue the side rests in, "opposite" the one its consumers hit.
 */
struct NodeView {
    Side side;
    const DecisionField& d;
    const Lattice& lat;

    double own_lp(std::size_t c, std::size_t i, std::size_t j) const {
        return side == Side::Sell ? d.sell[c](i, j) : d.buy[c](i, j);
    }
    double other_lp(std::size_t c, std::size_t i, std::size_t j) const {
        return side == Side::Sell ? d.buy[c](i, j) : d.sell[c](i, j);
    }
    // queue that this side's consumers hit (bid for sellers) and where it rests (ask)
    std::size_t hit_index(std::size_t i, std::size_t j) const { return side == Side::Sell ? j : i; }
    std::size_t rest_index(std::size_t i, std::size_t j) const { return side == Side::Sell ? i : j; }
};

double consume_price(Side side, double queue, double q, const MarketConfig& config) {
    return side == Side::Sell ? sell_price(queue, q, config.fair_price, config.market_depth)
                              : buy_price(queue, q, config.fair_price, config.market_depth);
}

double fill_price(Side side, double queue, double q, const MarketConfig& config) {
    // resting sellers are paid the buyers' price and conversely
    return side == Side::Sell ? buy_price(queue, q, config.fair_price, config.market_depth)
                              : sell_price(queue, q, config.fair_price, config.market_depth);
}

struct Accumulated {
    double lc_volume = 0.0, lc_value = 0.0;
    double lp_volume = 0.0, lp_value = 0.0;
};

Accumulated accumulate(const StationaryMeasure& measure, const DecisionField& raw,
                       const MarketConfig& config, std::size_t c, Side side) {
    check_shapes(measure, raw, config, c);
    const DecisionField d = apply_boundary(raw, config);
    const Lattice lat = d.lattice;
    const NodeView view{side, d, lat};
    const std::size_t classes = config.classes.size();
    const auto& me = config.classes[c];
    const std::size_t kc = config.steps(c);

    Accumulated acc;
    for (std::size_t i = 0; i < lat.n; ++i) {
        for (std::size_t j = 0; j < lat.n; ++j) {
            const double m = measure.mass[lat.index(i, j)];
            if (m == 0.0) continue;
            const std::size_t hit = view.hit_index(i, j);
            const std::size_t rest = view.rest_index(i, j);

            if (hit >= kc) {
                const double rate =
                    me.sor_intensity * (1.0 - view.own_lp(c, i, j)) + me.nonsor_intensity;
                const double volume = rate * me.order_size * m;
                acc.lc_volume += volume;
                acc.lc_value += volume * consume_price(side, lat.size(hit), me.order_size, config);
            }

            double total = 0.0;
            for (std::size_t e = 0; e < classes; ++e)
                total += config.classes[e].sor_intensity * view.own_lp(e, i, j);
            if (total <= 0.0) continue;
            const double gamma = me.sor_intensity * view.own_lp(c, i, j) / total;
            if (gamma == 0.0) continue;
            const double queue = lat.size(rest);
            for (std::size_t e = 0; e < classes; ++e) {
                if (rest < config.steps(e)) continue;
                const auto& cls = config.classes[e];
                const double xi =
                    (cls.sor_intensity * (1.0 - view.other_lp(e, i, j)) + cls.nonsor_intensity) *
                    cls.order_size / queue;
                const double w = gamma * xi * m;
                acc.lp_volume += w;
                acc.lp_value += w * fill_price(side, queue, cls.order_size, config);
            }
        }
    }
    return acc;
}

TradeMetrics mean_of(const std::vector<TradeMetrics>& all) {
    TradeMetrics mix;
    if (all.empty()) return mix;
    const double w = 1.0 / static_cast<double>(all.size());
    auto add = [w](SideMetrics& to, const SideMetrics& from) {
        to.lc_volume += w * from.lc_volume;
        to.lp_volume += w * from.lp_volume;
        to.lc_price += w * from.lc_price;
        to.lp_price += w * from.lp_price;
        to.average += w * from.average;
    };
    for (const auto& t : all) {
        add(mix.sell, t.sell);
        add(mix.buy, t.buy);
        mix.spread += w * t.spread;
        mix.spread_bps += w * t.spread_bps;
        mix.lc_spread += w * t.lc_spread;
        mix.effective_spread += w * t.effective_spread;
    }
    return mix;
}

}  // namespace

RegionTable RegionTable::build(const MarketConfig& config, Side side) {
    RegionTable t;
    t.classes = config.classes.size();
    const Region all[] = {Region::PlusPlus, Region::PlusMinus, Region::MinusPlus,
                          Region::MinusMinus};
    if (t.classes == 1) {
        for (Region r : all) t.entries.push_back(entry_for({r}, config, side));
    } else if (t.classes == 2) {
        t.entries.resize(9);
        for (Region a : all)
            for (Region b : all) {
                const int label = combined_region(a, b);
                if (label > 0) t.entries[label - 1] = entry_for({a, b}, config, side);
            }
    } else {
        throw ConfigError("region table needs one or two classes");
    }
    return t;
}

const RegionEntry& RegionTable::at(int label) const {
    if (label < 1 || static_cast<std::size_t>(label) > entries.size())
        throw DomainError("no region with label " + std::to_string(label));
    return entries[static_cast<std::size_t>(label - 1)];
}

int table_label(const DecisionField& decisions, std::size_t i, std::size_t j) {
    if (decisions.sell.size() == 1) return static_cast<int>(decisions.region(0, i, j)) + 1;
    return decisions.combined_region(i, j);
}

double lc_volume(const StationaryMeasure& measure, const DecisionField& decisions,
                 const MarketConfig& config, std::size_t c, Side side) {
    return accumulate(measure, decisions, config, c, side).lc_volume;
}

double lp_volume(const StationaryMeasure& measure, const DecisionField& decisions,
                 const MarketConfig& config, std::size_t c, Side side) {
    return accumulate(measure, decisions, config, c, side).lp_volume;
}

SideMetrics average_prices(const StationaryMeasure& measure, const DecisionField& decisions,
                           const MarketConfig& config, std::size_t c, Side side) {
    const Accumulated acc = accumulate(measure, decisions, config, c, side);
    const double volume = acc.lc_volume + acc.lp_volume;
    if (!(volume > 0.0)) throw DomainError("average price undefined: no traded volume");
    SideMetrics s;
    s.lc_volume = acc.lc_volume;
    s.lp_volume = acc.lp_volume;
    s.lc_price = acc.lc_volume > 0.0 ? acc.lc_value / acc.lc_volume : kNaN;
    s.lp_price = acc.lp_volume > 0.0 ? acc.lp_value / acc.lp_volume : kNaN;
    s.average = (acc.lc_value + acc.lp_value) / volume;
    return s;
}

double expected_spread(const SideMetrics& sell, const SideMetrics& buy) {
    return buy.average - sell.average;
}

double effective_spread(const StationaryMeasure& measure, const DecisionField& raw,
                        const MarketConfig& config, std::size_t c) {
    check_shapes(measure, raw, config, c);
    const DecisionField d = apply_boundary(raw, config);
    const Lattice lat = d.lattice;
    const auto& me = config.classes[c];
    const std::size_t k = config.steps(c);
    double buy_w = 0.0, buy_v = 0.0, sell_w = 0.0, sell_v = 0.0;
    for (std::size_t i = 0; i < lat.n; ++i) {
        for (std::size_t j = 0; j < lat.n; ++j) {
            const double m = measure.mass[lat.index(i, j)];
            if (m == 0.0) continue;
            if (i >= k) {
                const double w = (me.sor_intensity * (1.0 - d.buy[c](i, j)) + me.nonsor_intensity) * m;
                buy_w += w;
                buy_v += w * me.order_size / lat.size(i);
            }
            if (j >= k) {
                const double w =
                    (me.sor_intensity * (1.0 - d.sell[c](i, j)) + me.nonsor_intensity) * m;
                sell_w += w;
                sell_v += w * me.order_size / lat.size(j);
            }
        }
    }
    if (!(buy_w > 0.0) || !(sell_w > 0.0))
        throw DomainError("effective spread undefined: class " + me.label + " never consumes");
    return config.market_depth * (buy_v / buy_w + sell_v / sell_w);
}

TradeMetrics trade_metrics(const StationaryMeasure& measure, const DecisionField& decisions,
                           const MarketConfig& config, std::size_t c) {
    TradeMetrics t;
    t.sell = average_prices(measure, decisions, config, c, Side::Sell);
    t.buy = average_prices(measure, decisions, config, c, Side::Buy);
    t.spread = expected_spread(t.sell, t.buy);
    t.spread_bps = 1e4 * t.spread / config.fair_price;
    t.lc_spread = t.buy.lc_price - t.sell.lc_price;
    t.effective_spread = effective_spread(measure, decisions, config, c);
    return t;
}

MarketMetrics market_metrics(const StationaryMeasure& measure, const DecisionField& decisions,
                             const MarketConfig& config) {
    MarketMetrics mm;
    for (std::size_t c = 0; c < config.classes.size(); ++c)
        mm.classes.push_back(trade_metrics(measure, decisions, config, c));
    mm.mix = mean_of(mm.classes);
    return mm;
}

QueueFlow queue_flow(const StationaryMeasure& measure, const JumpGenerator& gen,
                     const MarketConfig& config) {
    if (!(measure.lattice == gen.lattice)) throw DomainError("measure and generator differ");
    QueueFlow f;
    for (std::size_t s = 0; s < gen.states(); ++s) {
        const double m = measure.mass[s];
        for (const auto& t : gen.rows[s]) {
            const double volume = m * t.rate * config.classes[t.cls].order_size;
            switch (t.kind) {
                case EventKind::LpSell: f.ask_insertion += volume; break;
                case EventKind::LcBuy: f.ask_consumption += volume; break;
                case EventKind::LpBuy: f.bid_insertion += volume; break;
                case EventKind::LcSell: f.bid_consumption += volume; break;
            }
        }
    }
    return f;
}

}  // namespace lobmfg
