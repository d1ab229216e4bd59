#include "lobmfg/single_queue.hpp"

#include "lobmfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lobmfg {

std::size_t SingleQueueParams::count() const {
    return static_cast<std::size_t>(std::llround(x_max / order_size));
}

double SingleQueueParams::max_service() const {
    double m = 0.0;
    for (std::size_t k = 0; k < count(); ++k) m = std::max(m, service(size(k)));
    return m;
}

double SingleQueueParams::max_payoff() const {
    double m = 0.0;
    for (std::size_t k = 0; k < count(); ++k) m = std::max(m, payoff(size(k)));
    return m;
}

void SingleQueueParams::validate() const {
    if (!service || !payoff) throw ConfigError("service and payoff functions are required");
    if (!(order_size > 0.0)) throw ConfigError("order size must be positive");
    if (!(waiting_cost > 0.0)) throw ConfigError("waiting cost must be positive");
    const double ratio = x_max / order_size;
    if (!(x_max >= order_size) || std::abs(ratio - std::round(ratio)) > 1e-9)
        throw ConfigError("x_max must be a positive multiple of the order size");
    for (std::size_t k = 0; k < count(); ++k) {
        const double x = size(k);
        if (!(service(x) >= 0.0)) throw ConfigError("service intensity must be nonnegative");
        if (!(payoff(x) >= 0.0)) throw ConfigError("payoff must be nonnegative");
    }
    if (!(arrival_intensity > max_service()))
        throw ConfigError("arrival intensity must exceed the service intensity everywhere");
    if (!(relaxation > 0.0 && relaxation <= 1.0)) throw ConfigError("relaxation must lie in (0, 1]");
    if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
}

SingleQueueParams SingleQueueParams::step(double lambda, double mu1, double mu2, double threshold,
                                          double payoff, double cost, double q, double x_max) {
    if (!(mu1 < mu2)) throw ConfigError("step service requires mu1 < mu2");
    SingleQueueParams p;
    p.arrival_intensity = lambda;
    p.service = [mu1, mu2, threshold](double x) { return x < threshold ? mu1 : mu2; };
    p.payoff = [payoff](double) { return payoff; };
    p.waiting_cost = cost;
    p.order_size = q;
    p.x_max = x_max;
    return p;
}

std::vector<double> SingleQueueValue::sign_switches() const {
    std::vector<double> out;
    for (std::size_t k = 1; k < u.size(); ++k)
        if ((u[k] > 0.0) != (u[k - 1] > 0.0)) out.push_back(size(k));
    return out;
}

std::vector<std::pair<double, double>> SingleQueueValue::positive_intervals() const {
    std::vector<std::pair<double, double>> out;
    for (std::size_t k = 0; k < u.size(); ++k) {
        if (!(u[k] > 0.0)) continue;
        if (k == 0 || !(u[k - 1] > 0.0))
            out.emplace_back(size(k), size(k));
        else
            out.back().second = size(k);
    }
    return out;
}

namespace {

// Expected share of the payoff received when a market order of size q hits a
// queue of size x: pro-rata pays q/x to everyone, the randomized rule pays all
// of it with probability q/x.
double fill_fraction(MatchingRule rule, double q, double x) {
    switch (rule) {
        case MatchingRule::ProRata:
            return q / x;
        case MatchingRule::RandomizedFullFill:
            return q / x;
    }
    return q / x;
}

struct Stepper {
    double lambda, cost_step, floor, omega;
};

/**
 * Stationary value of a node given its neighbours. `stay` is the value reached
 * without entrance (numerator `base` over rate `mu`), `enter` adds arrivals at
 * rate lambda towards `above`. A node whose value would be negative with
 * entrance but positive without it is an indifference point: arrivals enter
 * with the probability that makes the value exactly zero.
 */
struct NodeTarget {
    double value = 0.0;
    double entry = 0.0;  // probability that an arrival joins the queue
    bool pure_cost = false;
};

NodeTarget node_target(bool can_enter, double lambda, double mu, double base,
                       double above) {
    NodeTarget t;
    const double with = can_enter ? (lambda * above + base) / (lambda + mu) : 0.0;
    // Entering is taken whenever it is self-consistent (largest equilibrium).
    if (can_enter && with > 0.0) {
        t.value = with;
        t.entry = 1.0;
        return t;
    }
    if (mu == 0.0) {
        t.pure_cost = true;
        return t;
    }
    if (base > 0.0 && can_enter) {
        // Without entrance the value is positive, with it negative.
        t.value = 0.0;
        t.entry = -base / (lambda * above);
        return t;
    }
    t.value = base / mu;
    return t;
}

double damped(const Stepper& s, double old, const NodeTarget& t, double& change) {
    double next;
    if (!t.pure_cost) {
        change = std::max(change, std::abs(t.value - old));
        next = old + s.omega * (t.value - old);
    } else {
        next = std::max(old - s.cost_step, s.floor);
        change = std::max(change, std::abs(next - old));
    }
    if (!std::isfinite(next)) throw SolverError("non-finite value in queue iteration", change, 0);
    return next;
}

}  // namespace

std::vector<double> single_queue_map(const SingleQueueParams& params, const std::vector<double>& u) {
    const std::size_t n = params.count();
    const double q = params.order_size;
    const double cq = params.waiting_cost * q;
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = params.size(k);
        const double mu = params.service(x);
        const double f = fill_fraction(params.rule, q, x);
        const double below = k > 0 ? u[k - 1] : 0.0;
        const double base = mu * (f * params.payoff(x) + (1.0 - f) * below) - cq;
        const bool can_enter = k + 1 < n;
        const NodeTarget t = node_target(can_enter, params.arrival_intensity, mu, base,
                                         can_enter ? u[k + 1] : 0.0);
        out[k] = t.pure_cost ? u[k] : t.value;
    }
    return out;
}

SingleQueueValue solve_single_queue(const SingleQueueParams& params) {
    params.validate();
    const std::size_t n = params.count();
    const double q = params.order_size;
    const double cq = params.waiting_cost * q;
    const Stepper st{params.arrival_intensity, cq / (params.arrival_intensity + params.max_service()),
                     -cq * params.x_max / params.arrival_intensity, params.relaxation};

    std::vector<double> mu(n), pay(n), frac(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double x = params.size(k);
        mu[k] = params.service(x);
        pay[k] = params.payoff(x);
        frac[k] = fill_fraction(params.rule, q, x);
    }

    SingleQueueValue out;
    out.q = q;
    out.u.assign(n, params.start_value());
    out.entry.assign(n, 0.0);
    std::vector<double> next(n);
    for (std::size_t it = 1; it <= params.max_iterations; ++it) {
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double below = k > 0 ? out.u[k - 1] : 0.0;
            const double base = mu[k] * (frac[k] * pay[k] + (1.0 - frac[k]) * below) - cq;
            // The entrance term is dropped at the cap.
            const bool can_enter = k + 1 < n;
            const NodeTarget t = node_target(can_enter, params.arrival_intensity, mu[k],
                                             base, can_enter ? out.u[k + 1] : 0.0);
            out.entry[k] = t.entry;
            next[k] = damped(st, out.u[k], t, change);
        }
        out.u.swap(next);
        out.iterations = it;
        out.residual = change;
        if (change < params.tolerance) return out;
    }
    throw SolverError("single-queue iteration did not converge", out.residual, out.iterations);
}

std::pair<double, double> first_order_switch_points(double mu1, double mu2, double payoff,
                                                    double cost) {
    if (!(cost > 0.0)) throw DomainError("waiting cost must be positive");
    return {mu1 * payoff / cost, mu2 * payoff / cost};
}

double first_order_switch_point(double mu, const std::function<double(double)>& payoff,
                                double cost, double x_max) {
    if (!(cost > 0.0)) throw DomainError("waiting cost must be positive");
    const auto f = [&](double x) { return cost * x - mu * payoff(x); };
    // f is negative near zero whenever the payoff is positive there; scan for the first sign change.
    const std::size_t scan = 4096;
    double lo = x_max * 1e-9;
    double flo = f(lo);
    for (std::size_t k = 1; k <= scan; ++k) {
        double hi = x_max * static_cast<double>(k) / static_cast<double>(scan);
        const double fhi = f(hi);
        if (flo == 0.0) return lo;
        if ((flo < 0.0) != (fhi < 0.0) || fhi == 0.0) {
            for (int b = 0; b < 200 && hi - lo > 1e-15 * hi; ++b) {
                const double mid = 0.5 * (lo + hi);
                const double fm = f(mid);
                if ((fm < 0.0) == (flo < 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return 0.5 * (lo + hi);
        }
        lo = hi;
        flo = fhi;
    }
    throw DomainError("no switching point in (0, " + std::to_string(x_max) + "]");
}

FifoValue solve_fifo(const SingleQueueParams& params) {
    params.validate();
    const std::size_t n = params.count();
    const double q = params.order_size;
    const double cq = params.waiting_cost * q;
    const Stepper st{params.arrival_intensity, cq / (params.arrival_intensity + params.max_service()),
                     -cq * params.x_max / params.arrival_intensity, params.relaxation};

    FifoValue out;
    out.q = q;
    out.n = n;
    out.data.assign(n * n, params.start_value());
    std::vector<double> next = out.data;
    for (std::size_t it = 1; it <= params.max_iterations; ++it) {
        double change = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            const double size = params.size(x);
            const double mu = params.service(size);
            // Entrance is decided by a newcomer standing at the back of the queue.
            const bool can_enter = x + 1 < n;
            const auto base_at = [&](std::size_t z) {
                return mu * (z == 0 ? params.payoff(size) : out(z - 1, x - 1)) - cq;
            };
            const NodeTarget back = node_target(can_enter, params.arrival_intensity, mu,
                                                base_at(x), can_enter ? out(x, x + 1) : 0.0);
            const double a = params.arrival_intensity * back.entry;
            for (std::size_t z = 0; z <= x; ++z) {
                NodeTarget t;
                if (a + mu > 0.0)
                    t.value = (base_at(z) + (a > 0.0 ? a * out(z, x + 1) : 0.0)) / (a + mu);
                else
                    t.pure_cost = true;
                next[z * n + x] = damped(st, out(z, x), t, change);
            }
        }
        out.data.swap(next);
        out.iterations = it;
        out.residual = change;
        if (change < params.tolerance) return out;
    }
    throw SolverError("FIFO iteration did not converge", out.residual, out.iterations);
}

}  // namespace lobmfg
