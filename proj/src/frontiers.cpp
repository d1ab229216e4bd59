#include "lobmfg/frontiers.hpp"

#include "lobmfg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lobmfg {

FirstOrderParams FirstOrderParams::from(const MarketConfig& config, std::size_t c) {
    if (c >= config.classes.size()) throw ConfigError("class index out of range");
    const AgentClass& k = config.classes[c];
    return FirstOrderParams{k.order_size, k.sor_intensity, k.nonsor_intensity, k.waiting_cost,
                            config.market_depth};
}

double FirstOrderParams::eta() const {
    if (!(lambda_minus > 0.0))
        throw DomainError("first-order analysis needs a positive non-SOR intensity");
    return cost / (depth * q * lambda_minus);
}

double x0_star(double q, double eta) {
    if (!(eta > 0.0)) throw DomainError("eta must be positive");
    return 0.5 * (q + std::sqrt(q * q + 8.0 / eta));
}

double x0_star(const FirstOrderParams& p) { return x0_star(p.q, p.eta()); }

double m0_partner(const FirstOrderParams& p, double x0) {
    const double eta = p.eta();
    const double star = x0_star(p.q, eta);
    const double g = eta * x0 - 1.0 / (x0 - p.q);
    if (x0 < star * (1.0 - 1e-12) || !(g > 0.0))
        throw DomainError("x0 below the diagonal point of the boundary");
    return p.q + 1.0 / g;
}

std::string curve_name(CurveKind kind) {
    switch (kind) {
        case CurveKind::M0: return "m0";
        case CurveKind::M1: return "m1";
        case CurveKind::NumericPC: return "numeric_pc";
        case CurveKind::NumericCP: return "numeric_cp";
    }
    return "unknown";
}

FrontierCurve mirror(const FrontierCurve& curve) {
    FrontierCurve out{curve.kind, {}};
    out.points.reserve(curve.points.size());
    for (const auto& [x, y] : curve.points) out.points.emplace_back(y, x);
    return out;
}

std::vector<double> x0_samples(const FirstOrderParams& p, double x_max, double step) {
    if (!(step > 0.0)) throw ConfigError("sampling step must be positive");
    const double star = x0_star(p);
    std::vector<double> out;
    if (star > x_max) return out;
    out.push_back(star);
    for (double x = (std::floor(star / step) + 1.0) * step; x <= x_max + 1e-12; x += step)
        out.push_back(x);
    return out;
}

FrontierCurve m0_curve(const FirstOrderParams& p, const std::vector<double>& x0s) {
    FrontierCurve out{CurveKind::M0, {}};
    for (double x0 : x0s) out.points.emplace_back(x0, m0_partner(p, x0));
    return out;
}

double Characteristic::operator()(double y) const {
    return constant * std::pow(y, -a) - b / (a - 1.0) / y - d / (a + 1.0) * y;
}

double Characteristic::derivative(double y) const {
    return -a * constant * std::pow(y, -a - 1.0) + b / (a - 1.0) / (y * y) - d / (a + 1.0);
}

double Characteristic::ode_residual(double y) const {
    return derivative(y) + a / y * (*this)(y) + b / (y * y) + d;
}

Characteristic characteristic_solution(const FirstOrderParams& p, double x0, ConstantForm form) {
    Characteristic f;
    f.x0 = x0;
    f.l = m0_partner(p, x0);
    f.k = x0 - f.l;
    f.a = p.a();
    f.b = p.b();
    f.d = p.d();
    const double denom = std::pow(f.l, -f.a) + std::pow(x0, -f.a);
    const double inv = 1.0 / f.l + 1.0 / x0;
    const double sum = f.l + x0;
    if (form == ConstantForm::Consistent) {
        f.constant = (f.b / (f.a - 1.0) * inv + f.d / (f.a + 1.0) * sum) / denom;
    } else {
        const double ratio = p.lambda / p.lambda_minus;
        f.constant = p.depth *
                     ((1.0 + p.lambda_minus / p.lambda) * inv - p.eta() / (1.0 + ratio) * sum) / denom;
    }
    return f;
}

FrontierCurve m1_curve(const FirstOrderParams& p, const std::vector<double>& x0s, double y_max,
                       double scan_step, M1Diagnostics* diagnostics) {
    if (!(scan_step > 0.0)) throw ConfigError("scan step must be positive");
    FrontierCurve out{CurveKind::M1, {}};
    for (double x0 : x0s) {
        const Characteristic f = characteristic_solution(p, x0);
        const auto g = [&](double y) { return f(y) - p.depth / (y + f.k - p.q); };
        std::vector<double> roots;
        double lo = f.l;
        double glo = g(lo);
        if (glo == 0.0) roots.push_back(lo);
        for (double hi = lo + scan_step; hi <= y_max + 1e-12; hi += scan_step) {
            const double ghi = g(hi);
            if (ghi == 0.0) {
                roots.push_back(hi);
            } else if (glo != 0.0 && (glo < 0.0) != (ghi < 0.0)) {
                double a = lo, b = hi, ga = glo;
                for (int it = 0; it < 200 && b - a > 1e-13 * b; ++it) {
                    const double m = 0.5 * (a + b);
                    const double gm = g(m);
                    if ((gm < 0.0) == (ga < 0.0)) {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                roots.push_back(0.5 * (a + b));
            }
            lo = hi;
            glo = ghi;
        }
        if (roots.empty()) {
            if (diagnostics) diagnostics->skipped_x0.push_back(x0);
            continue;
        }
        if (roots.front() + f.k > y_max + 1e-12) continue;  // beyond the lattice
        out.points.emplace_back(roots.front() + f.k, roots.front());
        if (diagnostics && roots.size() > 1)
            diagnostics->extra_roots.emplace_back(x0, std::vector<double>(roots.begin() + 1, roots.end()));
    }
    return out;
}

namespace {

FrontierCurve numeric_curve(const DecisionField& decisions, const MarketConfig& config, std::size_t c,
                            bool sell) {
    const Lattice lat = config.lattice();
    if (!(decisions.lattice == lat)) throw ConfigError("decision field does not match the lattice");
    FrontierCurve out{sell ? CurveKind::NumericPC : CurveKind::NumericCP, {}};
    const auto lp = [&](std::size_t i, std::size_t j) {
        return sell ? decisions.lp_sell(c, i, j) : decisions.lp_buy(c, i, j);
    };
    for (std::size_t t = 0; t < lat.n; ++t) {
        for (std::size_t j = 0; j + t + 1 < lat.n; ++j) {
            const std::size_t i = j + t;
            if (!is_free(config, Indicator{sell, c, i, j}) ||
                !is_free(config, Indicator{sell, c, i + 1, j + 1}))
                continue;
            if (lp(i, j) == lp(i + 1, j + 1)) continue;
            out.points.emplace_back(0.5 * (lat.size(i) + lat.size(i + 1)),
                                    0.5 * (lat.size(j) + lat.size(j + 1)));
        }
    }
    return out;
}

double segment_distance(std::pair<double, double> p, std::pair<double, double> a,
                        std::pair<double, double> b) {
    const double dx = b.first - a.first, dy = b.second - a.second;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0)
        t = std::clamp(((p.first - a.first) * dx + (p.second - a.second) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.first - (a.first + t * dx), p.second - (a.second + t * dy));
}

}  // namespace

FrontierCurve numeric_pc_curve(const DecisionField& decisions, const MarketConfig& config,
                               std::size_t c) {
    return numeric_curve(decisions, config, c, true);
}

FrontierCurve numeric_cp_curve(const DecisionField& decisions, const MarketConfig& config,
                               std::size_t c) {
    return numeric_curve(decisions, config, c, false);
}

DistanceSummary boundary_distance(const FrontierCurve& numeric, const FrontierCurve& analytic,
                                  double grid_step) {
    if (numeric.points.empty() || analytic.points.empty())
        throw DomainError("boundary distance needs two non-empty curves");
    if (!(grid_step > 0.0)) throw ConfigError("grid step must be positive");
    DistanceSummary s;
    double total = 0.0;
    for (const auto& p : numeric.points) {
        double best = std::numeric_limits<double>::infinity();
        if (analytic.points.size() == 1) best = segment_distance(p, analytic.points[0], analytic.points[0]);
        for (std::size_t k = 0; k + 1 < analytic.points.size(); ++k)
            best = std::min(best, segment_distance(p, analytic.points[k], analytic.points[k + 1]));
        total += best;
        s.max_shares = std::max(s.max_shares, best);
    }
    s.points = numeric.points.size();
    s.mean_shares = total / static_cast<double>(s.points);
    s.mean = s.mean_shares / grid_step;
    s.max = s.max_shares / grid_step;
    return s;
}

namespace {

// Second-order accurate derivatives along one lattice direction; one-sided at the edges.
struct Stencil {
    const Grid& g;
    std::size_t n;
    double h;
    bool along_i;

    double at(std::size_t i, std::size_t j, long offset) const {
        return along_i ? g(static_cast<std::size_t>(static_cast<long>(i) + offset), j)
                       : g(i, static_cast<std::size_t>(static_cast<long>(j) + offset));
    }
    double first(std::size_t i, std::size_t j) const {
        const std::size_t p = along_i ? i : j;
        if (p == 0) return (-3.0 * at(i, j, 0) + 4.0 * at(i, j, 1) - at(i, j, 2)) / (2.0 * h);
        if (p + 1 == n) return (3.0 * at(i, j, 0) - 4.0 * at(i, j, -1) + at(i, j, -2)) / (2.0 * h);
        return (at(i, j, 1) - at(i, j, -1)) / (2.0 * h);
    }
    double second(std::size_t i, std::size_t j) const {
        const std::size_t p = along_i ? i : j;
        if (p == 0)
            return (2.0 * at(i, j, 0) - 5.0 * at(i, j, 1) + 4.0 * at(i, j, 2) - at(i, j, 3)) / (h * h);
        if (p + 1 == n)
            return (2.0 * at(i, j, 0) - 5.0 * at(i, j, -1) + 4.0 * at(i, j, -2) - at(i, j, -3)) / (h * h);
        return (at(i, j, 1) - 2.0 * at(i, j, 0) + at(i, j, -1)) / (h * h);
    }
};

}  // namespace

SecondOrderResidual second_order_residual(const ValueField& values, const DecisionField& decisions,
                                          const MarketConfig& config) {
    if (config.classes.size() != 1) throw ConfigError("second-order equations cover one class only");
    const Lattice lat = config.lattice();
    if (lat.n < 4) throw ConfigError("lattice too small for second-order differences");
    if (!(values.lattice == lat) || !(decisions.lattice == lat))
        throw ConfigError("fields do not match the lattice");
    const AgentClass& k = config.classes[0];
    const double q = k.order_size, lam = k.sor_intensity, lm = k.nonsor_intensity, c = k.waiting_cost;
    const double P = config.fair_price, delta = config.market_depth;
    const Grid& u = values.u[0];
    const Grid& v = values.v[0];

    const Stencil ux{u, lat.n, lat.h, true}, uy{u, lat.n, lat.h, false};
    const Stencil vx{v, lat.n, lat.h, true}, vy{v, lat.n, lat.h, false};

    SecondOrderResidual out{Grid(lat.n, 0.0), Grid(lat.n, 0.0)};
    for (std::size_t i = 0; i < lat.n; ++i) {
        for (std::size_t j = 0; j < lat.n; ++j) {
            const double x = lat.size(i), y = lat.size(j);
            const double s_lp = decisions.sell[0](i, j), b_lp = decisions.buy[0](i, j);
            const double s_lc = 1.0 - s_lp, b_lc = 1.0 - b_lp;
            const double alpha = lam * s_lp - lam * b_lc - lm;
            const double xi1 = (lam * (s_lp + b_lc) + lm) / 2.0;
            const double xi2 = (lam * (s_lc + b_lp) + lm) / 2.0;

            const double rate_a = lam * b_lc + lm;
            double ra = alpha * (ux.first(i, j) + uy.first(i, j)) - c;
            if (x > q) ra += rate_a / x * (P + delta * q / (x - q) - u(i, j));
            ra += q * (rate_a / x * ux.first(i, j) + xi1 * ux.second(i, j) + xi2 * uy.second(i, j));

            const double rate_b = lam * s_lc + lm;
            double rb = alpha * (vx.first(i, j) + vy.first(i, j)) + c;
            if (y > q) rb += rate_b / y * (P - delta * q / (y - q) - v(i, j));
            rb += q * (rate_b / y * vy.first(i, j) + xi1 * vx.second(i, j) + xi2 * vy.second(i, j));

            out.a(i, j) = ra;
            out.b(i, j) = rb;
        }
    }
    return out;
}

}  // namespace lobmfg
