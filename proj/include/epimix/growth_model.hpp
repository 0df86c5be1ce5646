#pragma once

#include <array>
#include <utility>

namespace epimix {

/// Four-parameter generalized logistic curve h(t) = a (1 + b e^{-ct})^{-gamma}.
///
/// a is the upper asymptote (carrying capacity), b a shift, c the growth rate
/// per unit of scaled time and gamma the asymmetry of the inflection point.
/// All four must be strictly positive.
struct LogisticParams {
    double a = 1.0;
    double b = 1.0;
    double c = 1.0;
    double gamma = 1.0;

    bool valid() const;
    /// Throws std::invalid_argument when a field is not a finite positive number.
    void validate() const;

    /// (log a, log b, log c, log gamma), the unconstrained optimizer coordinates.
    std::array<double, 4> to_log() const;
    static LogisticParams from_log(const std::array<double, 4>& log_params);

    friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

/// Mean trend for the (cases, deaths) response pair.
struct BivariateCurve {
    LogisticParams cases;
    LogisticParams deaths;

    bool valid() const { return cases.valid() && deaths.valid(); }
    void validate() const;

    friend bool operator==(const BivariateCurve&, const BivariateCurve&) = default;
};

struct InflectionPoint {
    double t0 = 0.0;
    double y0 = 0.0;
};

/// log(1 + e^x) without overflow or loss of precision for large |x|.
double softplus(double x);

double eval_logistic(double t, const LogisticParams& params);

/// Closed form: t0 = log(b gamma) / c, y0 = a (1 + 1/gamma)^{-gamma}.
InflectionPoint inflection_point(const LogisticParams& params);

std::pair<double, double> eval_curve(double t, const BivariateCurve& curve);

/// Analytic partials (dh/da, dh/db, dh/dc, dh/dgamma).
std::array<double, 4> logistic_gradient(double t, const LogisticParams& params);

/// Value and partials with respect to the log parameters, i.e.
/// (a dh/da, b dh/db, c dh/dc, gamma dh/dgamma). Used by the M-step.
struct LogisticEval {
    double value = 0.0;
    std::array<double, 4> d_log{};
};
LogisticEval eval_logistic_log_gradient(double t, const LogisticParams& params);

}  // namespace epimix
