#include "lobmfg/equilibrium.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace lobmfg {

std::string describe(const Indicator& ind, const Lattice& lattice) {
    std::ostringstream os;
    os << (ind.sell ? "sell" : "buy") << "[class " << ind.c << "] at (" << lattice.size(ind.i)
       << ", " << lattice.size(ind.j) << ")";
    return os.str();
}

namespace {

enum class Side { Ask, Bid };

using SparseMatrix = Eigen::SparseMatrix<double>;
using SparseLU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;
/**
 * Incomplete-LU preconditioner that is only rebuilt on request. Successive
 * outer steps change few matrix rows, so an older factorization still
 * preconditions well.
 */
class ReusableILUT {
public:
    using MatrixType = SparseMatrix;
    using StorageIndex = SparseMatrix::StorageIndex;

    ReusableILUT() = default;
    template <class M>
    ReusableILUT& analyzePattern(const M&) { return *this; }
    template <class M>
    ReusableILUT& factorize(const M& m) {
        if (stale_) {
            ilu_.setDroptol(1e-4);
            ilu_.setFillfactor(5);
            ilu_.compute(m);
            stale_ = false;
            age_ = 0;
        }
        ++age_;
        return *this;
    }
    template <class M>
    ReusableILUT& compute(const M& m) { return factorize(m); }
    template <class Rhs>
    auto solve(const Rhs& b) const { return ilu_.solve(b); }
    Eigen::ComputationInfo info() const { return ilu_.info(); }
    Eigen::Index rows() const { return ilu_.rows(); }
    Eigen::Index cols() const { return ilu_.cols(); }

    void invalidate() { stale_ = true; }
    std::size_t age() const { return age_; }

private:
    Eigen::IncompleteLUT<double> ilu_;
    bool stale_ = true;
    std::size_t age_ = 0;
};

using IterativeSolver = Eigen::BiCGSTAB<SparseMatrix, ReusableILUT>;

/** Precomputed class geometry and impact prices on the lattice. */
struct Market {
    const MarketConfig& config;
    Lattice lat;
    std::size_t n;
    std::vector<std::size_t> k;
    std::vector<std::vector<double>> pb;  // buy price per class and ask index
    std::vector<std::vector<double>> ps;  // sell price per class and bid index

    explicit Market(const MarketConfig& cfg) : config(cfg), lat(cfg.lattice()), n(lat.n) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
            k.push_back(cfg.steps(c));
            const double q = cfg.classes[c].order_size;
            std::vector<double> b(n, nan), s(n, nan);
            for (std::size_t i = k[c]; i < n; ++i) {
                b[i] = buy_price(lat.size(i), q, cfg.fair_price, cfg.market_depth);
                s[i] = sell_price(lat.size(i), q, cfg.fair_price, cfg.market_depth);
            }
            pb.push_back(std::move(b));
            ps.push_back(std::move(s));
        }
    }

    std::size_t classes() const { return k.size(); }

    double cost(std::size_t c) const {
        return config.classes[c].waiting_cost * config.classes[c].order_size;
    }
};

/**
 * Calls f(rate, target, coef, constant) for every event at node (i, j) of the
 * given side. The post-event value is coef * w[target] + constant. Events
 * that would leave the lattice are reported as self-loops.
 */
template <class ThetaS, class ThetaB, class F>
void for_each_event(Side side, const Market& m, std::size_t i, std::size_t j, ThetaS theta_s,
                    ThetaB theta_b, F&& f) {
    const std::size_t n = m.n;
    const std::size_t self = i * n + j;
    for (std::size_t c = 0; c < m.classes(); ++c) {
        const auto& cls = m.config.classes[c];
        const std::size_t k = m.k[c];
        const double q = cls.order_size;
        const double ts = theta_s(c);
        const double tb = theta_b(c);
        const double lp_sell = cls.sor_intensity * ts;
        const double lc_sell = cls.sor_intensity * (1.0 - ts) + cls.nonsor_intensity;
        const double lp_buy = cls.sor_intensity * tb;
        const double lc_buy = cls.sor_intensity * (1.0 - tb) + cls.nonsor_intensity;

        // LP sell grows the ask queue.
        f(lp_sell, i + k < n ? (i + k) * n + j : self, 1.0, 0.0);
        // LP buy grows the bid queue.
        f(lp_buy, j + k < n ? i * n + j + k : self, 1.0, 0.0);
        if (side == Side::Ask) {
            // LC sell consumes the bid queue.
            f(lc_sell, j >= k ? i * n + j - k : self, 1.0, 0.0);
            // LC buy consumes the ask queue and fills resting sell orders pro rata.
            if (i >= k) {
                const double share = q / m.lat.size(i);
                f(lc_buy, (i - k) * n + j, 1.0 - share, share * m.pb[c][i]);
            } else {
                f(lc_buy, self, 1.0, 0.0);
            }
        } else {
            f(lc_buy, i >= k ? (i - k) * n + j : self, 1.0, 0.0);
            if (j >= k) {
                const double share = q / m.lat.size(j);
                f(lc_sell, i * n + j - k, 1.0 - share, share * m.ps[c][j]);
            } else {
                f(lc_sell, self, 1.0, 0.0);
            }
        }
    }
}

double cost_sign(Side side) { return side == Side::Ask ? -1.0 : 1.0; }

const std::vector<Grid>& side_values(const ValueField& f, Side side) {
    return side == Side::Ask ? f.u : f.v;
}

Grid sweep(Side side, const ValueField& values, const DecisionField& d, const MarketConfig& config,
           std::size_t ci) {
    const Market m(config);
    const Grid& w = side_values(values, side).at(ci);
    Grid out(m.n, 0.0);
    const double cost = cost_sign(side) * m.cost(ci);
    for (std::size_t i = 0; i < m.n; ++i) {
        for (std::size_t j = 0; j < m.n; ++j) {
            double acc = 0.0, total = 0.0;
            for_each_event(
                side, m, i, j, [&](std::size_t c) { return d.sell[c](i, j); },
                [&](std::size_t c) { return d.buy[c](i, j); },
                [&](double rate, std::size_t t, double coef, double constant) {
                    total += rate;
                    acc += rate * (coef * w.data[t] + constant);
                });
            const double value = (acc + cost) / total;
            if (!std::isfinite(value)) throw SolverError("non-finite value in sweep", value, 0);
            out(i, j) = value;
        }
    }
    return out;
}

/** Frozen-decision linear system of one side, shared by all value classes. */
class SideSystem {
public:
    SideSystem(Side side, const Market& m) : side_(side), m_(m) {}

    void factor(const DecisionField& d) {
        const std::size_t n = m_.n;
        const std::size_t N = n * n;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(N * (1 + 4 * m_.classes()));
        base_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t r = i * n + j;
                double diag = 0.0;
                for_each_event(
                    side_, m_, i, j, [&](std::size_t c) { return d.sell[c].data[r]; },
                    [&](std::size_t c) { return d.buy[c].data[r]; },
                    [&](double rate, std::size_t t, double coef, double constant) {
                        if (t == r && coef == 1.0) return;
                        diag += rate;
                        trip.emplace_back(r, t, -rate * coef);
                        base_[static_cast<Eigen::Index>(r)] += rate * constant;
                    });
                trip.emplace_back(r, r, diag);
            }
        }
        a_.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
        a_.setFromTriplets(trip.begin(), trip.end());
        direct_ = false;
        if (it_.preconditioner().age() >= 10 || last_iterations_ > 25) it_.preconditioner().invalidate();
        it_.setTolerance(tolerance_);
        it_.setMaxIterations(300);
        it_.compute(a_);
        if (it_.info() != Eigen::Success) use_direct();
    }

    Grid solve_class(std::size_t c) {
        const Eigen::Index N = base_.size();
        Eigen::VectorXd rhs = base_ + Eigen::VectorXd::Constant(N, cost_sign(side_) * m_.cost(c));
        if (guess_.size() <= c) guess_.resize(c + 1);
        Eigen::VectorXd x = solve(rhs, guess_[c]);
        guess_[c] = x;
        Grid g(m_.n, 0.0);
        for (Eigen::Index r = 0; r < N; ++r) g.data[static_cast<std::size_t>(r)] = x[r];
        return g;
    }

    static constexpr double kTightTolerance = 1e-14;

    /** Relative accuracy of later iterative solves; early outer steps need little. */
    void set_accuracy(double relative) { tolerance_ = relative; }

    /** Row t of the inverse. Unit solves come in batches, so they use the factorization. */
    Eigen::VectorXd solve_unit_transposed(std::size_t t) {
        if (!direct_) use_direct();
        Eigen::VectorXd e = Eigen::VectorXd::Zero(base_.size());
        e[static_cast<Eigen::Index>(t)] = 1.0;
        return lu_.transpose().solve(e);
    }

private:
    double tolerance_ = kTightTolerance;

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs, const Eigen::VectorXd& guess) {
        if (!direct_) {
            Eigen::VectorXd x = guess.size() == rhs.size() ? it_.solveWithGuess(rhs, guess)
                                                           : Eigen::VectorXd(it_.solve(rhs));
            const double scale = std::max(rhs.norm(), 1e-300);
            last_iterations_ = static_cast<std::size_t>(it_.iterations());
            if (it_.info() == Eigen::Success ||
                (a_ * x - rhs).norm() <= std::max(1e-12, 10.0 * tolerance_) * scale)
                return x;
            use_direct();
        }
        return lu_.solve(rhs);
    }

    void use_direct() {
        direct_ = true;
        // Zero weights drop entries, so the pattern is analysed for every matrix.
        lu_.analyzePattern(a_);
        lu_.factorize(a_);
        if (lu_.info() != Eigen::Success)
            throw SolverError("singular value system (no reachable trade from some state)", 0, 0);
    }

    Side side_;
    const Market& m_;
    SparseMatrix a_;
    IterativeSolver it_;
    SparseLU lu_;
    bool direct_ = false;
    std::size_t last_iterations_ = 0;
    Eigen::VectorXd base_;
    std::vector<Eigen::VectorXd> guess_;
};

/** Row of the balance equation: sum_e rate_e (w_r - post_e) - sign * cost. */
double row_residual(Side side, const Market& m, const Grid& w, double cost, std::size_t i,
                    std::size_t j, const DecisionField& d, const Indicator* override_ind,
                    double override_theta) {
    const std::size_t r = i * m.n + j;
    auto theta = [&](bool sell, std::size_t c) {
        if (override_ind && override_ind->sell == sell && override_ind->c == c)
            return override_theta;
        return sell ? d.sell[c].data[r] : d.buy[c].data[r];
    };
    double acc = -cost_sign(side) * cost;
    for_each_event(
        side, m, i, j, [&](std::size_t c) { return theta(true, c); },
        [&](std::size_t c) { return theta(false, c); },
        [&](double rate, std::size_t t, double coef, double constant) {
            acc += rate * (w.data[r] - coef * w.data[t] - constant);
        });
    return acc;
}

double gap(const Market& m, const ValueField& values, const Indicator& ind) {
    const std::size_t k = m.k[ind.c];
    if (ind.sell) return values.u[ind.c](ind.i + k, ind.j) - m.ps[ind.c][ind.j];
    return m.pb[ind.c][ind.i] - values.v[ind.c](ind.i, ind.j + k);
}

bool free_indicator(const Market& m, const Indicator& ind) {
    const std::size_t k = m.k[ind.c];
    if (ind.i < k || ind.j < k) return false;
    return ind.sell ? ind.i + k < m.n : ind.j + k < m.n;
}

double& weight(DecisionField& d, const Indicator& ind) {
    return ind.sell ? d.sell[ind.c](ind.i, ind.j) : d.buy[ind.c](ind.i, ind.j);
}

DecisionField extract(const Market& m, const ValueField& values) {
    DecisionField d;
    d.lattice = m.lat;
    d.sell.assign(m.classes(), Grid(m.n, 0.0));
    d.buy.assign(m.classes(), Grid(m.n, 0.0));
    for (std::size_t c = 0; c < m.classes(); ++c)
        for (std::size_t i = 0; i < m.n; ++i)
            for (std::size_t j = 0; j < m.n; ++j) {
                Indicator s{true, c, i, j}, b{false, c, i, j};
                if (free_indicator(m, s)) d.sell[c](i, j) = gap(m, values, s) > 0.0 ? 1.0 : 0.0;
                if (free_indicator(m, b)) d.buy[c](i, j) = gap(m, values, b) > 0.0 ? 1.0 : 0.0;
            }
    return apply_boundary(std::move(d), m.config);
}

double sup_diff(const std::vector<Grid>& a, const std::vector<Grid>& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c)
        for (std::size_t r = 0; r < a[c].data.size(); ++r)
            s = std::max(s, std::abs(a[c].data[r] - b[c].data[r]));
    return s;
}

void relax(std::vector<Grid>& current, const std::vector<Grid>& target, double omega) {
    for (std::size_t c = 0; c < current.size(); ++c)
        for (std::size_t r = 0; r < current[c].data.size(); ++r)
            current[c].data[r] = (1.0 - omega) * current[c].data[r] + omega * target[c].data[r];
}

std::vector<std::uint8_t> snapshot(const DecisionField& d) {
    std::vector<std::uint8_t> s;
    for (const auto* side : {&d.sell, &d.buy})
        for (const auto& g : *side)
            for (double w : g.data) s.push_back(w > 0.5 ? 1 : 0);
    return s;
}

Indicator indicator_at(const Market& m, std::size_t flat) {
    const std::size_t per = m.n * m.n;
    const std::size_t block = flat / per;
    const std::size_t r = flat % per;
    const std::size_t nc = m.classes();
    return Indicator{block < nc, block % nc, r / m.n, r % m.n};
}

ValueField solve_both(const Market& m, SideSystem& ask, SideSystem& bid, const DecisionField& d) {
    ask.factor(d);
    bid.factor(d);
    ValueField f;
    f.lattice = m.lat;
    for (std::size_t c = 0; c < m.classes(); ++c) {
        f.u.push_back(ask.solve_class(c));
        f.v.push_back(bid.solve_class(c));
    }
    return f;
}

/** Average of a value field and its image under the ask/bid swap. */
ValueField symmetrized(const ValueField& values, double P) {
    ValueField out = values;
    const std::size_t n = values.lattice.n;
    for (std::size_t c = 0; c < values.u.size(); ++c)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                out.u[c](i, j) = 0.5 * (values.u[c](i, j) + 2.0 * P - values.v[c](j, i));
                out.v[c](j, i) = 0.5 * (values.v[c](j, i) + 2.0 * P - values.u[c](i, j));
            }
    return out;
}

/** Complementarity violation in price units; weights outside [0, 1] count in full. */
double complementarity(double theta, double g, double price_scale) {
    if (theta > 1.0) return std::max(std::abs(std::min(g, 0.0)), (theta - 1.0) * price_scale);
    if (theta < 0.0) return std::max(std::abs(std::max(g, 0.0)), -theta * price_scale);
    if (theta == 1.0) return std::min(g, 0.0);
    if (theta == 0.0) return std::max(g, 0.0);
    return g;
}

/**
 * Solves for a (possibly mixed) equilibrium in which the indicators of
 * `active` may take any weight in [0, 1]; all other free indicators stay
 * pure and are checked for consistency, joining the active set when they
 * disagree with the resulting values.
 */
struct Refinement {
    ValueField values;
    DecisionField decisions;
    std::size_t newton_iterations = 0;
    double residual = 0.0;
};

Refinement refine(const Market& m, SideSystem& ask, SideSystem& bid, DecisionField d,
                  std::vector<Indicator> active) {
    const double price_tol = 1e-3 * m.config.solver.tolerance * m.config.fair_price;
    const double pure_tol = 1e-12 * m.config.fair_price;
    Refinement out;
    for (int round = 0; round < 50; ++round) {
        ValueField values = solve_both(m, ask, bid, d);
        const std::size_t S = active.size();
        auto residuals = [&](const ValueField& vals, const DecisionField& dd, Eigen::VectorXd& g,
                             Eigen::VectorXd& res) {
            g.resize(static_cast<Eigen::Index>(S));
            res.resize(static_cast<Eigen::Index>(S));
            for (std::size_t a = 0; a < S; ++a) {
                const double gg = gap(m, vals, active[a]);
                const double th = active[a].sell ? dd.sell[active[a].c](active[a].i, active[a].j)
                                                 : dd.buy[active[a].c](active[a].i, active[a].j);
                g[static_cast<Eigen::Index>(a)] = gg;
                res[static_cast<Eigen::Index>(a)] = complementarity(th, gg, m.config.fair_price);
            }
        };
        Eigen::VectorXd kappa = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(S));
        bool scaled = false;
        auto phi = [&](const DecisionField& dd, const Eigen::VectorXd& gg) {
            Eigen::VectorXd out(gg.size());
            for (std::size_t a = 0; a < S; ++a) {
                const double th = weight(const_cast<DecisionField&>(dd), active[a]);
                const auto ea = static_cast<Eigen::Index>(a);
                out[ea] = th - std::clamp(th + kappa[ea] * gg[ea], 0.0, 1.0);
            }
            return out;
        };
        Eigen::VectorXd g, res;
        residuals(values, d, g, res);
        double norm = S ? res.cwiseAbs().maxCoeff() : 0.0;
        std::size_t iter = 0;
        Eigen::MatrixXd J;
        double last_ratio = 1.0;
        while (norm > price_tol) {
            if (++iter > 100)
                throw LimitCycleError("mixed-strategy refinement did not converge", norm,
                                      out.newton_iterations, active);
            ++out.newton_iterations;
            // Sensitivities: only row r of each system depends on a weight at node r.
            // They are reused while the merit keeps falling quickly.
            const bool rebuild = J.size() == 0 || last_ratio > 0.5;
            if (rebuild) J.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
            if (rebuild) {
                // Derivative of row r_b of each side in the values of class c.
                std::vector<std::vector<double>> dr_ask(m.classes(), std::vector<double>(S));
                std::vector<std::vector<double>> dr_bid = dr_ask;
                for (std::size_t c = 0; c < m.classes(); ++c)
                    for (std::size_t b = 0; b < S; ++b) {
                        const Indicator& ib = active[b];
                        dr_ask[c][b] =
                            row_residual(Side::Ask, m, values.u[c], m.cost(c), ib.i, ib.j, d, &ib, 1.0) -
                            row_residual(Side::Ask, m, values.u[c], m.cost(c), ib.i, ib.j, d, &ib, 0.0);
                        dr_bid[c][b] =
                            row_residual(Side::Bid, m, values.v[c], m.cost(c), ib.i, ib.j, d, &ib, 1.0) -
                            row_residual(Side::Bid, m, values.v[c], m.cost(c), ib.i, ib.j, d, &ib, 0.0);
                    }
                // Entry (a, b) is the target value of indicator a responding to the weight
                // of b, read off one transposed solve per row.
                for (std::size_t a = 0; a < S; ++a) {
                    const Indicator& ia = active[a];
                    const std::size_t k = m.k[ia.c];
                    const std::size_t t = ia.sell ? (ia.i + k) * m.n + ia.j : ia.i * m.n + ia.j + k;
                    const Eigen::VectorXd y =
                        ia.sell ? ask.solve_unit_transposed(t) : bid.solve_unit_transposed(t);
                    for (std::size_t b = 0; b < S; ++b) {
                        const auto r = static_cast<Eigen::Index>(active[b].i * m.n + active[b].j);
                        J(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                            ia.sell ? -y[r] * dr_ask[ia.c][b] : y[r] * dr_bid[ia.c][b];
                    }
                }
            }
            // Semismooth Newton on phi = theta - mid(0, 1, theta + g).
            // Rows are scaled once per round so that kappa * g is measured in weight units.
            if (!scaled) {
                for (std::size_t a = 0; a < S; ++a) {
                    const auto ea = static_cast<Eigen::Index>(a);
                    const double diag = std::abs(J(ea, ea));
                    kappa[ea] = diag > 0.0 ? 1.0 / diag : 1.0;
                }
                scaled = true;
            }
            const Eigen::VectorXd phi0 = phi(d, g);
            // Weights sitting on a bound whose step points outward are frozen and the
            // remaining system is solved again.
            std::vector<bool> frozen(S, false);
            Eigen::VectorXd step;
            for (std::size_t pass = 0; pass <= S; ++pass) {
                Eigen::MatrixXd M =
                    Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
                Eigen::VectorXd rhs = -phi0;
                for (std::size_t a = 0; a < S; ++a) {
                    const auto ea = static_cast<Eigen::Index>(a);
                    const double z = weight(d, active[a]) + kappa[ea] * g[ea];
                    if (frozen[a]) {
                        M(ea, ea) = 1.0;
                        rhs[ea] = 0.0;
                    } else if (z > 0.0 && z < 1.0) {
                        M.row(ea) = -kappa[ea] * J.row(ea);
                    } else {
                        M(ea, ea) = 1.0;
                    }
                }
                step = M.colPivHouseholderQr().solve(rhs);
                bool changed = false;
                for (std::size_t a = 0; a < S; ++a) {
                    if (frozen[a]) continue;
                    const double w = weight(d, active[a]);
                    const double sa = step[static_cast<Eigen::Index>(a)];
                    if ((w <= 0.0 && sa < 0.0) || (w >= 1.0 && sa > 0.0)) {
                        frozen[a] = true;
                        changed = true;
                    }
                }
                if (!changed) break;
            }
            const double merit = phi0.norm();
            auto attempt = [&](auto&& move) {
                double scale = 1.0;
                for (int ls = 0; ls < 30; ++ls, scale *= 0.5) {
                    DecisionField trial = d;
                    for (std::size_t a = 0; a < S; ++a) {
                        double& w = weight(trial, active[a]);
                        w = std::clamp(w + scale * move(a), 0.0, 1.0);
                        if (std::abs(w) < 1e-12) w = 0.0;
                        if (std::abs(w - 1.0) < 1e-12) w = 1.0;
                    }
                    ValueField tv = solve_both(m, ask, bid, trial);
                    Eigen::VectorXd tg, tres;
                    residuals(tv, trial, tg, tres);
                    if (phi(trial, tg).norm() < (1.0 - 1e-4 * scale) * merit) {
                        d = std::move(trial);
                        values = std::move(tv);
                        g = tg;
                        res = tres;
                        norm = tres.cwiseAbs().maxCoeff();
                        return true;
                    }
                }
                return false;
            };
            bool progressed = attempt([&](std::size_t a) { return step[static_cast<Eigen::Index>(a)]; });
            if (!progressed && !rebuild) {
                last_ratio = 1.0;
                continue;
            }
            // Projected fixed-point step as a fallback when the Newton direction fails.
            if (!progressed) progressed = attempt([&](std::size_t a) { return -phi0[static_cast<Eigen::Index>(a)]; });
            if (!progressed) break;
            last_ratio = merit > 0.0 ? phi(d, g).norm() / merit : 0.0;
        }
        // Re-factor at the final weights so later unit solves stay consistent.
        values = solve_both(m, ask, bid, d);
        out.residual = norm;

        std::vector<Indicator> added;
        for (std::size_t c = 0; c < m.classes(); ++c)
            for (std::size_t i = 0; i < m.n; ++i)
                for (std::size_t j = 0; j < m.n; ++j)
                    for (bool sell : {true, false}) {
                        Indicator ind{sell, c, i, j};
                        if (!free_indicator(m, ind)) continue;
                        const double th = weight(d, ind);
                        if (th > 0.0 && th < 1.0) continue;
                        const double gg = gap(m, values, ind);
                        if ((th == 1.0 && gg < -pure_tol) || (th == 0.0 && gg > pure_tol))
                            added.push_back(ind);
                    }
        if (added.empty()) {
            if (norm > price_tol)
                throw LimitCycleError("mixed-strategy refinement did not converge", norm,
                                      out.newton_iterations, active);
            out.values = std::move(values);
            out.decisions = std::move(d);
            return out;
        }
        for (const auto& ind : added) {
            bool present = false;
            for (const auto& x : active)
                if (x.sell == ind.sell && x.c == ind.c && x.i == ind.i && x.j == ind.j) present = true;
            if (!present) active.push_back(ind);
        }
    }
    throw LimitCycleError("decision field did not settle after mixed-strategy refinement",
                          out.residual, out.newton_iterations, active);
}

}  // namespace

Grid update_u(const ValueField& values, const DecisionField& decisions, const MarketConfig& config,
              std::size_t ci) {
    return sweep(Side::Ask, values, decisions, config, ci);
}

Grid update_u(const ValueField& values, const MarketConfig& config, std::size_t ci) {
    return update_u(values, extract_decisions(values, config), config, ci);
}

Grid update_v(const ValueField& values, const DecisionField& decisions, const MarketConfig& config,
              std::size_t ci) {
    return sweep(Side::Bid, values, decisions, config, ci);
}

Grid update_v(const ValueField& values, const MarketConfig& config, std::size_t ci) {
    return update_v(values, extract_decisions(values, config), config, ci);
}

ValueField solve_values(const DecisionField& decisions, const MarketConfig& config) {
    const Market m(config);
    SideSystem ask(Side::Ask, m), bid(Side::Bid, m);
    return solve_both(m, ask, bid, decisions);
}

DecisionField extract_decisions(const ValueField& values, const MarketConfig& config) {
    const Market m(config);
    return extract(m, values);
}

double decision_gap(const ValueField& values, const MarketConfig& config, const Indicator& ind) {
    const Market m(config);
    if (!free_indicator(m, ind)) throw DomainError("indicator is fixed by the boundary rules");
    return gap(m, values, ind);
}

bool is_free(const MarketConfig& config, const Indicator& ind) {
    const std::size_t k = config.steps(ind.c);
    const std::size_t n = config.lattice().n;
    if (ind.i < k || ind.j < k) return false;
    return ind.sell ? ind.i + k < n : ind.j + k < n;
}

double balance_residual(const ValueField& values, const DecisionField& decisions,
                        const MarketConfig& config) {
    const Market m(config);
    double worst = 0.0;
    for (std::size_t c = 0; c < m.classes(); ++c)
        for (std::size_t i = 0; i < m.n; ++i)
            for (std::size_t j = 0; j < m.n; ++j) {
                worst = std::max(worst, std::abs(row_residual(Side::Ask, m, values.u[c], m.cost(c), i,
                                                              j, decisions, nullptr, 0.0)));
                worst = std::max(worst, std::abs(row_residual(Side::Bid, m, values.v[c], m.cost(c), i,
                                                              j, decisions, nullptr, 0.0)));
            }
    return worst;
}

double antisymmetry_error(const ValueField& values, const MarketConfig& config, std::size_t c) {
    const double P = config.fair_price;
    const std::size_t n = values.lattice.n;
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            worst = std::max(worst, std::abs((values.u[c](i, j) - P) + (values.v[c](j, i) - P)));
    return worst;
}

Equilibrium solve_equilibrium(const MarketConfig& config, const std::optional<ValueField>& initial) {
    config.validate();
    const Market m(config);
    const auto& s = config.solver;
    const double tol = s.tolerance * config.fair_price;

    ValueField values = initial ? *initial : ValueField::constant(config, config.fair_price);
    if (!(values.lattice == m.lat) || values.u.size() != m.classes())
        throw ConfigError("initial values do not match the configured lattice");

    SideSystem ask(Side::Ask, m), bid(Side::Bid, m);
    EquilibriumDiagnostics diag;
    std::deque<std::vector<std::uint8_t>> history;
    std::vector<std::uint8_t> previous;
    std::size_t stable = 0;
    std::size_t periodic_steps = 0;
    constexpr std::size_t kHistory = 32;
    std::size_t cycle_period = 0;
    bool simultaneous = false;
    double best_residual = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    bool converged = false;

    for (std::size_t it = 1; it <= s.max_iterations; ++it) {
        diag.outer_iterations = it;
        // Sellers first, from the previous pair; then buyers, from the fresh sellers.
        // Inexact solves while the values are far from the fixed point.
        const double accuracy =
            it == 1 ? 1e-8
                    : std::clamp(1e-3 * diag.value_residual / config.fair_price,
                                 SideSystem::kTightTolerance, 1e-8);
        ask.set_accuracy(accuracy);
        bid.set_accuracy(accuracy);
        const DecisionField du = extract(m, values);
        ask.factor(du);
        std::vector<Grid> target_u;
        for (std::size_t c = 0; c < m.classes(); ++c) target_u.push_back(ask.solve_class(c));
        std::vector<Grid> old_u = values.u;
        relax(values.u, target_u, s.relaxation);

        const DecisionField dv = simultaneous ? du : extract(m, values);
        bid.factor(dv);
        std::vector<Grid> target_v;
        for (std::size_t c = 0; c < m.classes(); ++c) target_v.push_back(bid.solve_class(c));
        std::vector<Grid> old_v = values.v;
        relax(values.v, target_v, s.relaxation);

        diag.value_residual = std::max(sup_diff(values.u, old_u), sup_diff(values.v, old_v));
        if (!std::isfinite(diag.value_residual))
            throw SolverError("non-finite values in outer iteration", diag.value_residual, it);

        auto snap = snapshot(dv);
        const bool same = snap == previous;
        stable = same ? stable + 1 : 0;
        // A recurring decision field counts as a persistent oscillation.
        std::size_t period = 0;
        for (std::size_t p = 2; p <= kHistory && !same && period == 0; ++p)
            if (history.size() >= p && history[history.size() - p] == snap) period = p;
        periodic_steps = period ? periodic_steps + 1 : 0;
        if (period) cycle_period = period;
        // Without an exact recurrence, stalled progress while decisions keep
        // changing is treated the same way, over the whole history window.
        if (diag.value_residual < best_residual) {
            best_residual = diag.value_residual;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (!same && since_best >= kHistory && history.size() + 1 >= kHistory) {
            periodic_steps = s.cycle_window;
            cycle_period = kHistory;
        }
        previous = snap;
        history.push_back(std::move(snap));
        if (history.size() > kHistory) history.pop_front();

        if (diag.value_residual < tol && stable >= 2) {
            converged = true;
            break;
        }
        if (periodic_steps >= s.cycle_window) {
            diag.oscillation_detected = true;
            if (simultaneous) break;
            // The alternating order breaks the buyer/seller symmetry of the cycle;
            // restart from the side-symmetric part of the current iterate with both
            // sides updated from one decision field.
            simultaneous = true;
            values = symmetrized(values, config.fair_price);
            best_residual = std::numeric_limits<double>::infinity();
            since_best = 0;
            periodic_steps = 0;
            stable = 0;
            history.clear();
        }
    }
    if (!converged && !(simultaneous && periodic_steps >= s.cycle_window))
        throw SolverError("equilibrium iteration exceeded max_iterations", diag.value_residual,
                          diag.outer_iterations);

    // Indicators that flipped inside the window start at their time average.
    DecisionField start = extract(m, values);
    std::vector<Indicator> active;
    if (!converged) {
        const std::size_t len = history.front().size();
        const std::size_t first = history.size() - cycle_period;
        for (std::size_t f = 0; f < len; ++f) {
            std::size_t ones = 0;
            bool flipped = false;
            for (std::size_t h = first; h < history.size(); ++h) {
                ones += history[h][f];
                if (h > first && history[h][f] != history[h - 1][f]) flipped = true;
            }
            if (!flipped) continue;
            const Indicator ind = indicator_at(m, f);
            if (!free_indicator(m, ind)) continue;
            active.push_back(ind);
            weight(start, ind) = static_cast<double>(ones) / static_cast<double>(cycle_period);
        }
        // The mirrored choice of the opposite side joins too, so that a symmetric
        // mixed equilibrium remains reachable from the asymmetric outer iterates.
        const std::size_t flipped = active.size();
        for (std::size_t a = 0; a < flipped; ++a) {
            const Indicator mirror{!active[a].sell, active[a].c, active[a].j, active[a].i};
            if (!free_indicator(m, mirror)) continue;
            bool present = false;
            for (const auto& x : active)
                if (x.sell == mirror.sell && x.c == mirror.c && x.i == mirror.i && x.j == mirror.j)
                    present = true;
            if (!present) active.push_back(mirror);
        }
    }
    ask.set_accuracy(SideSystem::kTightTolerance);
    bid.set_accuracy(SideSystem::kTightTolerance);
    Refinement refined = refine(m, ask, bid, std::move(start), std::move(active));
    diag.newton_iterations = refined.newton_iterations;
    diag.complementarity_residual = refined.residual;
    diag.mixed_indicators = refined.decisions.mixed_count();
    diag.balance_residual = balance_residual(refined.values, refined.decisions, config);
    return Equilibrium{std::move(refined.values), std::move(refined.decisions), diag};
}

}  // namespace lobmfg
