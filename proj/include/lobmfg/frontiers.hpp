#pragma once

#include "lobmfg/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lobmfg {

/** Parameters of the first-order (small q) analysis of one symmetric class. */
struct FirstOrderParams {
    double q = 1.0;
    double lambda = 1.0;        // SOR intensity
    double lambda_minus = 0.2;  // non-SOR intensity
    double cost = 2.5e-3;
    double depth = 2.0;         // delta

    static FirstOrderParams from(const MarketConfig& config, std::size_t c = 0);

    /** eta = c / (delta q lambda^-). */
    double eta() const;
    double a() const { return 1.0 + lambda / lambda_minus; }
    double b() const { return depth * a(); }
    double d() const { return -depth * eta(); }
};

/** Diagonal point of the provider-to-consumer boundary, (q + sqrt(q^2 + 8/eta)) / 2. */
double x0_star(double q, double eta);
double x0_star(const FirstOrderParams& p);

/** l(x0) = q + (eta x0 - 1/(x0 - q))^-1, defined for x0 >= x0*. */
double m0_partner(const FirstOrderParams& p, double x0);

enum class CurveKind { M0, M1, NumericPC, NumericCP };
std::string curve_name(CurveKind kind);

/** Points (Q_a, Q_b) in shares, below the diagonal unless mirrored. */
struct FrontierCurve {
    CurveKind kind = CurveKind::M0;
    std::vector<std::pair<double, double>> points;
};

FrontierCurve mirror(const FrontierCurve& curve);

/** Sample x0 from x0* to x_max with the given step (x0* itself is included). */
std::vector<double> x0_samples(const FirstOrderParams& p, double x_max, double step);

FrontierCurve m0_curve(const FirstOrderParams& p, const std::vector<double>& x0s);

/** How the integration constant of the characteristic solution is computed. */
enum class ConstantForm {
    Consistent,  // from the initial condition f(l(x0)) = -f(x0)
    Printed      // transcription with -eta/(1 + lambda/lambda^-) in the numerator
};

/**
 * f(y) = C y^-a - b/(a-1) y^-1 - d/(a+1) y along the characteristic through
 * (x0, l(x0)), shifted by k = x0 - l(x0).
 */
struct Characteristic {
    double x0 = 0.0, l = 0.0, k = 0.0;
    double a = 0.0, b = 0.0, d = 0.0, constant = 0.0;

    double operator()(double y) const;
    double derivative(double y) const;
    /** f' + (a/y) f + b/y^2 + d. */
    double ode_residual(double y) const;
};

Characteristic characteristic_solution(const FirstOrderParams& p, double x0,
                                       ConstantForm form = ConstantForm::Consistent);

struct M1Diagnostics {
    std::vector<double> skipped_x0;                                // no sign change in the bracket
    std::vector<std::pair<double, std::vector<double>>> extra_roots;  // x0 with further roots y1
};

/**
 * Consumer boundary: for each x0 the first y1 >= l(x0) (scanning upwards in
 * steps of scan_step) with f(y1) = delta / (y1 + k - q), refined by bisection.
 * Points with x1 = y1 + k beyond y_max are dropped.
 */
FrontierCurve m1_curve(const FirstOrderParams& p, const std::vector<double>& x0s, double y_max,
                       double scan_step, M1Diagnostics* diagnostics = nullptr);

/**
 * Midpoints between neighbours along the (1,1) direction, on or below the
 * diagonal, where the seller (P->C) or buyer (C->P) choice of class c differs.
 * Pairs touching boundary-forced nodes are ignored.
 */
FrontierCurve numeric_pc_curve(const DecisionField& decisions, const MarketConfig& config,
                               std::size_t c = 0);
FrontierCurve numeric_cp_curve(const DecisionField& decisions, const MarketConfig& config,
                               std::size_t c = 0);

struct DistanceSummary {
    double mean = 0.0;  // grid units
    double max = 0.0;
    double mean_shares = 0.0;
    double max_shares = 0.0;
    std::size_t points = 0;
};

/** One-sided distance from the numeric points to the analytic polyline. */
DistanceSummary boundary_distance(const FrontierCurve& numeric, const FrontierCurve& analytic,
                                  double grid_step);

/** Residuals of the local second-order equations of the seller (a) and buyer (b) values. */
struct SecondOrderResidual {
    Grid a;
    Grid b;
};

SecondOrderResidual second_order_residual(const ValueField& values, const DecisionField& decisions,
                                          const MarketConfig& config);

}  // namespace lobmfg
