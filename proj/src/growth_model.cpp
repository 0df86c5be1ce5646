#include "epimix/growth_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace epimix {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

// Logistic sigmoid 1 / (1 + e^{-x}), the derivative of softplus.
double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

bool LogisticParams::valid() const {
    return positive_finite(a) && positive_finite(b) && positive_finite(c) && positive_finite(gamma);
}

void LogisticParams::validate() const {
    if (!valid()) {
        throw std::invalid_argument("logistic parameters must be finite and positive (a=" + std::to_string(a) +
                                    ", b=" + std::to_string(b) + ", c=" + std::to_string(c) +
                                    ", gamma=" + std::to_string(gamma) + ")");
    }
}

std::array<double, 4> LogisticParams::to_log() const {
    return {std::log(a), std::log(b), std::log(c), std::log(gamma)};
}

LogisticParams LogisticParams::from_log(const std::array<double, 4>& p) {
    return {std::exp(p[0]), std::exp(p[1]), std::exp(p[2]), std::exp(p[3])};
}

void BivariateCurve::validate() const {
    cases.validate();
    deaths.validate();
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

// h = a exp(-gamma * log(1 + b e^{-ct})) with log(1 + b e^{-ct}) = softplus(log b - ct).
double eval_logistic(double t, const LogisticParams& p) {
    const double s = softplus(std::log(p.b) - p.c * t);
    return p.a * std::exp(-p.gamma * s);
}

InflectionPoint inflection_point(const LogisticParams& p) {
    return {std::log(p.b * p.gamma) / p.c, p.a * std::pow(1.0 + 1.0 / p.gamma, -p.gamma)};
}

std::pair<double, double> eval_curve(double t, const BivariateCurve& curve) {
    return {eval_logistic(t, curve.cases), eval_logistic(t, curve.deaths)};
}

std::array<double, 4> logistic_gradient(double t, const LogisticParams& p) {
    const double u = std::log(p.b) - p.c * t;
    const double s = softplus(u);
    const double w = sigmoid(u);  // b e^{-ct} / (1 + b e^{-ct})
    const double g = std::exp(-p.gamma * s);
    const double h = p.a * g;
    return {g, -h * p.gamma * w / p.b, h * p.gamma * w * t, -h * s};
}

LogisticEval eval_logistic_log_gradient(double t, const LogisticParams& p) {
    const double u = std::log(p.b) - p.c * t;
    const double s = softplus(u);
    const double w = sigmoid(u);
    const double h = p.a * std::exp(-p.gamma * s);
    const double hgw = h * p.gamma * w;
    return {h, {h, -hgw, hgw * p.c * t, -h * p.gamma * s}};
}

}  // namespace epimix
