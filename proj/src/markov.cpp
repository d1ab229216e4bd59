#include "lobmfg/markov.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>

namespace lobmfg {

std::string event_name(EventKind kind) {
    switch (kind) {
        case EventKind::LpSell: return "lp_sell";
        case EventKind::LcSell: return "lc_sell";
        case EventKind::LpBuy: return "lp_buy";
        case EventKind::LcBuy: return "lc_buy";
    }
    return "unknown";
}

double JumpGenerator::total_rate(std::size_t s) const {
    double r = 0.0;
    for (const auto& t : rows[s]) r += t.rate;
    return r;
}

double JumpGenerator::max_rate() const {
    double m = 0.0;
    for (std::size_t s = 0; s < rows.size(); ++s) m = std::max(m, total_rate(s));
    return m;
}

JumpGenerator build_generator(const DecisionField& input, const MarketConfig& config) {
    config.validate();
    const Lattice lat = config.lattice();
    if (!(input.lattice == lat) || input.sell.size() != config.classes.size())
        throw ConfigError("decision field does not match the configuration");
    const DecisionField d = apply_boundary(input, config);

    JumpGenerator gen;
    gen.lattice = lat;
    gen.rows.resize(lat.count());
    for (std::size_t i = 0; i < lat.n; ++i) {
        for (std::size_t j = 0; j < lat.n; ++j) {
            auto& row = gen.rows[lat.index(i, j)];
            for (std::size_t c = 0; c < config.classes.size(); ++c) {
                const AgentClass& a = config.classes[c];
                const std::size_t k = config.steps(c);
                const double ts = d.sell[c](i, j), tb = d.buy[c](i, j);
                const auto add = [&](bool ok, std::size_t ti, std::size_t tj, double rate, EventKind kind) {
                    if (ok && rate > 0.0) row.push_back({lat.index(ti, tj), rate, kind, c});
                };
                add(i + k < lat.n, i + k, j, a.sor_intensity * ts, EventKind::LpSell);
                add(j >= k, i, j - k, a.sor_intensity * (1.0 - ts) + a.nonsor_intensity, EventKind::LcSell);
                add(j + k < lat.n, i, j + k, a.sor_intensity * tb, EventKind::LpBuy);
                add(i >= k, i - k, j, a.sor_intensity * (1.0 - tb) + a.nonsor_intensity, EventKind::LcBuy);
            }
            if (row.empty())
                throw DomainError("absorbing state at " + std::to_string(lat.size(i)) + ", " +
                                  std::to_string(lat.size(j)));
        }
    }
    return gen;
}

namespace {

std::vector<bool> reach(const std::vector<std::vector<std::size_t>>& adjacency, std::size_t from) {
    std::vector<bool> seen(adjacency.size(), false);
    std::deque<std::size_t> queue{from};
    seen[from] = true;
    while (!queue.empty()) {
        const std::size_t s = queue.front();
        queue.pop_front();
        for (std::size_t t : adjacency[s])
            if (!seen[t]) {
                seen[t] = true;
                queue.push_back(t);
            }
    }
    return seen;
}

}  // namespace

std::vector<bool> recurrent_support(const JumpGenerator& gen) {
    const std::size_t n = gen.states();
    std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
    for (std::size_t s = 0; s < n; ++s)
        for (const auto& t : gen.rows[s]) {
            fwd[s].push_back(t.target);
            bwd[t.target].push_back(s);
        }
    const std::vector<bool> from_min = reach(fwd, 0);
    const std::vector<bool> to_min = reach(bwd, 0);
    std::size_t stuck = 0;
    for (std::size_t s = 0; s < n; ++s)
        if (!to_min[s]) ++stuck;
    if (stuck > 0)
        throw DomainError("reducible chain: " + std::to_string(stuck) +
                          " states cannot return to the minimal state");
    return from_min;
}

double StationaryMeasure::residual(const JumpGenerator& gen) const {
    std::vector<double> flow(mass.size(), 0.0);
    for (std::size_t s = 0; s < gen.states(); ++s)
        for (const auto& t : gen.rows[s]) {
            flow[t.target] += mass[s] * t.rate;
            flow[s] -= mass[s] * t.rate;
        }
    double r = 0.0;
    for (double f : flow) r += std::abs(f);
    return r;
}

double StationaryMeasure::total_variation(const StationaryMeasure& other) const {
    if (!(lattice == other.lattice)) throw ConfigError("measures live on different lattices");
    double tv = 0.0;
    for (std::size_t s = 0; s < mass.size(); ++s) tv += std::abs(mass[s] - other.mass[s]);
    return 0.5 * tv;
}

std::size_t StationaryMeasure::argmax() const {
    return static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
}

std::vector<std::size_t> StationaryMeasure::modes(double min_mass) const {
    std::vector<std::size_t> out;
    const std::size_t n = lattice.n;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const double m = (*this)(i, j);
            if (!(m > min_mass)) continue;
            bool top = true;
            for (int di = -1; di <= 1 && top; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const long a = static_cast<long>(i) + di, b = static_cast<long>(j) + dj;
                    if (a < 0 || b < 0 || a >= static_cast<long>(n) || b >= static_cast<long>(n)) continue;
                    if ((*this)(static_cast<std::size_t>(a), static_cast<std::size_t>(b)) >= m) {
                        top = false;
                        break;
                    }
                }
            if (top) out.push_back(lattice.index(i, j));
        }
    return out;
}

std::vector<std::vector<std::pair<std::size_t, double>>> uniformized_rows(const JumpGenerator& gen) {
    const double lambda = gen.max_rate();
    std::vector<std::vector<std::pair<std::size_t, double>>> rows(gen.states());
    for (std::size_t s = 0; s < gen.states(); ++s) {
        double stay = 1.0;
        for (const auto& t : gen.rows[s]) {
            const double p = t.rate / lambda;
            rows[s].emplace_back(t.target, p);
            stay -= p;
        }
        rows[s].emplace_back(s, std::max(stay, 0.0));
    }
    return rows;
}

namespace {

StationaryMeasure direct_solve(const JumpGenerator& gen, const std::vector<bool>& support) {
    const std::size_t n = gen.states();
    std::vector<long> local(n, -1);
    std::size_t count = 0;
    for (std::size_t s = 1; s < n; ++s)
        if (support[s]) local[s] = static_cast<long>(count++);

    StationaryMeasure out{gen.lattice, std::vector<double>(n, 0.0)};
    out.mass[0] = 1.0;
    if (count > 0) {
        // Balance at every supported state except the minimal one, whose mass is fixed to 1.
        std::vector<Eigen::Triplet<double>> trips;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(count));
        for (std::size_t s = 0; s < n; ++s) {
            if (!support[s]) continue;
            const double out_rate = gen.total_rate(s);
            if (local[s] >= 0) trips.emplace_back(local[s], local[s], -out_rate);
            for (const auto& t : gen.rows[s]) {
                if (local[t.target] < 0) continue;
                if (s == 0)
                    rhs[local[t.target]] -= t.rate;
                else
                    trips.emplace_back(local[t.target], local[s], t.rate);
            }
        }
        Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
        a.setFromTriplets(trips.begin(), trips.end());
        a.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw SolverError("stationary system is singular", 0.0, 0);
        const Eigen::VectorXd x = lu.solve(rhs);
        for (std::size_t s = 1; s < n; ++s)
            if (local[s] >= 0) out.mass[s] = x[local[s]];
    }
    double total = 0.0;
    for (double& m : out.mass) {
        if (m < 0.0) {
            if (m < -1e-12) throw SolverError("negative stationary mass", m, 0);
            m = 0.0;
        }
        total += m;
    }
    for (double& m : out.mass) m /= total;
    return out;
}

StationaryMeasure power_iteration(const JumpGenerator& gen, const std::vector<bool>& support,
                                  const PowerIterationSettings& settings) {
    const auto rows = uniformized_rows(gen);
    const std::size_t n = gen.states();
    std::vector<double> m(n, 0.0), next(n);
    const double share = 1.0 / static_cast<double>(std::count(support.begin(), support.end(), true));
    for (std::size_t s = 0; s < n; ++s)
        if (support[s]) m[s] = share;
    // Convergence is judged over blocks of steps: with block changes d_k shrinking
    // by a ratio r, the remaining distance to the fixed point is about d_k r / (1 - r).
    constexpr std::size_t kBlock = 100;
    const double floor = 100.0 * std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(n));
    std::vector<double> mark = m;
    double change = std::numeric_limits<double>::infinity();
    double previous = change;
    for (std::size_t it = 1; it <= settings.max_iterations; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            if (m[s] == 0.0) continue;
            for (const auto& [t, p] : rows[s]) next[t] += m[s] * p;
        }
        double total = 0.0;
        for (double x : next) total += x;
        for (double& x : next) x /= total;
        m.swap(next);
        if (it % kBlock != 0) continue;
        change = 0.0;
        for (std::size_t s = 0; s < n; ++s) change += std::abs(m[s] - mark[s]);
        mark = m;
        const double ratio = change / previous;
        previous = change;
        const double estimate = ratio < 1.0 ? change * ratio / (1.0 - ratio) : change;
        if ((estimate < settings.tolerance && change < 1e-6) || change < floor)
            return StationaryMeasure{gen.lattice, std::move(m)};
    }
    throw SolverError("power iteration did not converge", change, settings.max_iterations);
}

}  // namespace

StationaryMeasure stationary_measure(const JumpGenerator& gen, StationaryMethod method,
                                     const PowerIterationSettings& settings) {
    const std::vector<bool> support = recurrent_support(gen);
    if (method == StationaryMethod::Direct) return direct_solve(gen, support);
    return power_iteration(gen, support, settings);
}

StationaryMeasure Trajectory::empirical_measure() const {
    StationaryMeasure m{lattice, occupancy};
    if (horizon > 0.0)
        for (double& x : m.mass) x /= horizon;
    return m;
}

Trajectory simulate(const JumpGenerator& gen, const MarketConfig& config, const SimulationSettings& settings) {
    if (settings.start >= gen.states()) throw ConfigError("start state outside the lattice");
    const Lattice& lat = gen.lattice;
    Trajectory traj;
    traj.lattice = lat;
    traj.start_i = static_cast<std::uint32_t>(settings.start / lat.n);
    traj.start_j = static_cast<std::uint32_t>(settings.start % lat.n);
    traj.occupancy.assign(gen.states(), 0.0);
    traj.visits.assign(gen.states(), 0);
    if (settings.record_events) traj.events.reserve(settings.events);

    std::mt19937_64 rng(settings.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t s = settings.start;
    double t = 0.0;
    traj.visits[s] = 1;
    for (std::uint64_t e = 0; e < settings.events; ++e) {
        const auto& row = gen.rows[s];
        const double total = gen.total_rate(s);
        // Exponential holding time by inversion; 1 - U lies in (0, 1].
        const double dt = -std::log(1.0 - unit(rng)) / total;
        traj.occupancy[s] += dt;
        t += dt;
        double pick = unit(rng) * total;
        std::size_t choice = row.size() - 1;
        for (std::size_t r = 0; r < row.size(); ++r) {
            if (pick < row[r].rate) {
                choice = r;
                break;
            }
            pick -= row[r].rate;
        }
        const Transition& tr = row[choice];
        double price = std::numeric_limits<double>::quiet_NaN();
        const double q = config.classes[tr.cls].order_size;
        if (tr.kind == EventKind::LcBuy)
            price = buy_price(lat.size(s / lat.n), q, config.fair_price, config.market_depth);
        else if (tr.kind == EventKind::LcSell)
            price = sell_price(lat.size(s % lat.n), q, config.fair_price, config.market_depth);
        s = tr.target;
        ++traj.visits[s];
        if (settings.record_events)
            traj.events.push_back({t, static_cast<std::uint32_t>(s / lat.n), static_cast<std::uint32_t>(s % lat.n),
                                   tr.kind, static_cast<std::uint8_t>(tr.cls), price});
    }
    traj.horizon = t;
    return traj;
}

}  // namespace lobmfg
