#include "lobmfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lobmfg {

void AgentClass::validate() const {
    auto fail = [this](const std::string& what) {
        throw ConfigError("class '" + label + "': " + what);
    };
    if (!(order_size > 0.0)) fail("order_size must be positive");
    if (!(sor_intensity >= 0.0)) fail("sor_intensity must be nonnegative");
    if (!(nonsor_intensity >= 0.0)) fail("nonsor_intensity must be nonnegative");
    if (!(waiting_cost > 0.0)) fail("waiting_cost must be positive");
    if (!(total_intensity() > 0.0)) fail("total intensity must be positive");
}

double size_gcd(const std::vector<double>& sizes) {
    if (sizes.empty()) throw ConfigError("no order sizes");
    double g = sizes.front();
    const double tol = 1e-9 * *std::max_element(sizes.begin(), sizes.end());
    for (std::size_t k = 1; k < sizes.size(); ++k) {
        double a = std::max(g, sizes[k]);
        double b = std::min(g, sizes[k]);
        while (b > tol) {
            double r = std::fmod(a, b);
            if (r > b - tol) r = 0.0;
            a = b;
            b = r;
        }
        g = a;
    }
    return g;
}

double MarketConfig::grid_step() const {
    std::vector<double> sizes;
    for (const auto& c : classes) sizes.push_back(c.order_size);
    return size_gcd(sizes);
}

double MarketConfig::max_order_size() const {
    double m = 0.0;
    for (const auto& c : classes) m = std::max(m, c.order_size);
    return m;
}

Lattice MarketConfig::lattice() const {
    const double h = grid_step();
    const double ratio = grid_max / h;
    return Lattice{h, static_cast<std::size_t>(std::llround(ratio))};
}

std::size_t MarketConfig::steps(std::size_t c) const {
    return static_cast<std::size_t>(std::llround(classes.at(c).order_size / grid_step()));
}

void MarketConfig::validate() const {
    if (classes.empty() || classes.size() > 2)
        throw ConfigError("one or two agent classes are required");
    for (const auto& c : classes) c.validate();
    if (!(market_depth > 0.0)) throw ConfigError("market_depth must be positive");
    if (!(fair_price > market_depth)) throw ConfigError("fair_price must exceed market_depth");
    const double h = grid_step();
    if (max_order_size() / h > 64.0 + 1e-9) {
        std::ostringstream os;
        os << "order sizes have greatest common divisor " << h
           << ", more than 64 times smaller than the largest size " << max_order_size();
        throw ConfigError(os.str());
    }
    for (const auto& c : classes) {
        const double ratio = c.order_size / h;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
            std::ostringstream os;
            os << "order size " << c.order_size << " of class '" << c.label
               << "' is not a multiple of the grid step " << h;
            throw ConfigError(os.str());
        }
    }
    const double cells = grid_max / h;
    if (std::abs(cells - std::round(cells)) > 1e-9 * cells)
        throw ConfigError("grid_max must be a multiple of the grid step");
    if (grid_max < 40.0 * max_order_size() - 1e-9) {
        std::ostringstream os;
        os << "grid_max " << grid_max << " is below 40 times the largest order size ("
           << 40.0 * max_order_size() << ")";
        throw ConfigError(os.str());
    }
    if (!(solver.tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (!(solver.relaxation > 0.0 && solver.relaxation <= 1.0))
        throw ConfigError("relaxation weight must lie in (0, 1]");
    if (solver.max_iterations == 0) throw ConfigError("max_iterations must be positive");
    if (solver.cycle_window < 4) throw ConfigError("cycle_window must be at least 4");
}

double buy_price(double ask_size, double q, double fair_price, double depth) {
    if (!(ask_size > q)) {
        std::ostringstream os;
        os << "buy price undefined for ask queue " << ask_size << " <= order size " << q;
        throw DomainError(os.str());
    }
    return fair_price + depth * q / (ask_size - q);
}

double sell_price(double bid_size, double q, double fair_price, double depth) {
    if (!(bid_size > q)) {
        std::ostringstream os;
        os << "sell price undefined for bid queue " << bid_size << " <= order size " << q;
        throw DomainError(os.str());
    }
    return fair_price - depth * q / (bid_size - q);
}

ValueField ValueField::constant(const MarketConfig& config, double value) {
    ValueField f;
    f.lattice = config.lattice();
    f.u.assign(config.classes.size(), Grid(f.lattice.n, value));
    f.v.assign(config.classes.size(), Grid(f.lattice.n, value));
    return f;
}

std::string region_name(Region r) {
    switch (r) {
        case Region::PlusPlus: return "R++";
        case Region::PlusMinus: return "R+-";
        case Region::MinusPlus: return "R-+";
        case Region::MinusMinus: return "R--";
    }
    return "?";
}

Region make_region(bool lp_sell, bool lp_buy) {
    if (lp_sell) return lp_buy ? Region::PlusPlus : Region::PlusMinus;
    return lp_buy ? Region::MinusPlus : Region::MinusMinus;
}

DecisionField DecisionField::filled(const MarketConfig& config, double value) {
    DecisionField d;
    d.lattice = config.lattice();
    d.sell.assign(config.classes.size(), Grid(d.lattice.n, value));
    d.buy.assign(config.classes.size(), Grid(d.lattice.n, value));
    return d;
}

Region DecisionField::region(std::size_t c, std::size_t i, std::size_t j) const {
    return make_region(lp_sell(c, i, j), lp_buy(c, i, j));
}

int combined_region(Region a, Region b) {
    using R = Region;
    struct Entry { R first, second; int label; };
    static const Entry table[] = {
        {R::PlusPlus, R::PlusPlus, 1},    {R::PlusPlus, R::MinusMinus, 2},
        {R::MinusMinus, R::MinusMinus, 3}, {R::PlusPlus, R::MinusPlus, 4},
        {R::MinusPlus, R::PlusMinus, 5},  {R::MinusPlus, R::MinusMinus, 6},
        {R::PlusPlus, R::PlusMinus, 7},   {R::PlusMinus, R::PlusMinus, 8},
        {R::PlusMinus, R::MinusMinus, 9},
    };
    for (const auto& e : table)
        if (e.first == a && e.second == b) return e.label;
    return 0;
}

int DecisionField::combined_region(std::size_t i, std::size_t j) const {
    if (sell.size() < 2) return 0;
    return lobmfg::combined_region(region(0, i, j), region(1, i, j));
}

std::size_t DecisionField::mixed_count() const {
    std::size_t count = 0;
    for (const auto* side : {&sell, &buy})
        for (const auto& g : *side)
            for (double w : g.data)
                if (w > 0.0 && w < 1.0) ++count;
    return count;
}

bool lp_buy_indicator(const Grid& v, const MarketConfig& config, std::size_t c, std::size_t i,
                      std::size_t j_shifted) {
    const Lattice lat = config.lattice();
    if (i >= lat.n || j_shifted >= lat.n) throw DomainError("indicator evaluated off the lattice");
    const double p = buy_price(lat.size(i), config.classes[c].order_size, config.fair_price,
                               config.market_depth);
    return v(i, j_shifted) < p;
}

bool lp_sell_indicator(const Grid& u, const MarketConfig& config, std::size_t c,
                       std::size_t i_shifted, std::size_t j) {
    const Lattice lat = config.lattice();
    if (i_shifted >= lat.n || j >= lat.n) throw DomainError("indicator evaluated off the lattice");
    const double p = sell_price(lat.size(j), config.classes[c].order_size, config.fair_price,
                                config.market_depth);
    return u(i_shifted, j) > p;
}

bool floor_forced(const MarketConfig& config, std::size_t c, std::size_t i, std::size_t j) {
    const std::size_t k = config.steps(c);
    return i < k || j < k;
}

DecisionField apply_boundary(DecisionField d, const MarketConfig& config) {
    const std::size_t n = d.lattice.n;
    for (std::size_t c = 0; c < d.sell.size(); ++c) {
        const std::size_t k = config.steps(c);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i < k || j < k) {
                    d.sell[c](i, j) = 1.0;
                    d.buy[c](i, j) = 1.0;
                }
                if (i + k >= n) d.sell[c](i, j) = 0.0;
                if (j + k >= n) d.buy[c](i, j) = 0.0;
            }
        }
    }
    return d;
}

}  // namespace lobmfg
