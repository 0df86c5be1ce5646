#pragma once

// Small deterministic local optimizers for fixed-dimension problems.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace epimix::optim {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int N>
using Mat = Eigen::Matrix<double, N, N>;

enum class Status { converged, stalled, budget };

template <int N>
struct Result {
    Vec<N> x;
    double value = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    Status status = Status::stalled;
    double gradient_norm = std::numeric_limits<double>::infinity();  ///< max |J^T e| at x (least squares only)
};

struct LmOptions {
    int max_evaluations = 2000;
    double ftol = 1e-12;  ///< stop once an accepted step reduces f by less than ftol * f
    double xtol = 1e-12;  ///< stop once the step is below xtol * (|x| + xtol)
    double initial_lambda = 1e-3;
};

/// Levenberg-Marquardt on f(x) = sum of squared residuals.
///
/// `linearize(x, JtJ, Jte)` returns f(x) and fills the Gauss-Newton normal
/// matrix and J^T e; `objective(x)` returns f(x) alone. Either may return
/// +inf for points outside the domain. Only strictly decreasing steps are
/// accepted, so the result never has a larger value than the start.
template <int N, typename Linearize, typename Objective>
Result<N> levenberg_marquardt(Vec<N> x, Linearize&& linearize, Objective&& objective, const LmOptions& opt = {}) {
    Mat<N> jtj;
    Vec<N> jte;
    Result<N> res;
    double f = linearize(x, jtj, jte);
    res.evaluations = 1;
    if (!std::isfinite(f)) {
        res.x = x;
        res.value = f;
        return res;
    }
    double lambda = opt.initial_lambda;
    res.status = Status::budget;
    while (res.evaluations < opt.max_evaluations) {
        if (f == 0.0 || jte.template lpNorm<Eigen::Infinity>() == 0.0) {
            res.status = Status::converged;
            break;
        }
        bool accepted = false;
        bool done = false;
        while (res.evaluations < opt.max_evaluations) {
            Mat<N> aug = jtj;
            for (int i = 0; i < N; ++i) aug(i, i) += lambda * std::max(jtj(i, i), 1e-12 * (1.0 + jtj.diagonal().maxCoeff()));
            const Vec<N> step = aug.ldlt().solve(-jte);
            if (!step.allFinite()) {
                lambda *= 10.0;
            } else if (step.norm() <= opt.xtol * (x.norm() + opt.xtol)) {
                res.status = Status::converged;
                done = true;
                break;
            } else {
                const Vec<N> trial = x + step;
                const double f_trial = objective(trial);
                ++res.evaluations;
                if (f_trial < f) {
                    const double reduction = (f - f_trial) / f;
                    x = trial;
                    f = linearize(x, jtj, jte);
                    ++res.evaluations;
                    lambda = std::max(lambda * 0.1, 1e-15);
                    accepted = true;
                    if (reduction < opt.ftol) {
                        res.status = Status::converged;
                        done = true;
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if (lambda > 1e16) {
                res.status = Status::stalled;
                done = true;
                break;
            }
        }
        if (done || !accepted) break;
    }
    res.x = x;
    res.value = f;
    res.gradient_norm = jte.template lpNorm<Eigen::Infinity>();
    return res;
}

struct NelderMeadOptions {
    int max_evaluations = 2000;
    double initial_step = 0.1;
    double ftol = 1e-12;  ///< stop once the simplex value spread is below ftol * |best|
};

/// Deterministic Nelder-Mead with the standard coefficients (1, 2, 1/2, 1/2).
template <int N, typename Objective>
Result<N> nelder_mead(const Vec<N>& start, Objective&& f, const NelderMeadOptions& opt = {}) {
    std::array<Vec<N>, N + 1> simplex;
    std::array<double, N + 1> values;
    Result<N> res;
    simplex[0] = start;
    values[0] = f(start);
    res.evaluations = 1;
    for (int i = 0; i < N; ++i) {
        simplex[i + 1] = start;
        simplex[i + 1](i) += opt.initial_step;
        values[i + 1] = f(simplex[i + 1]);
        ++res.evaluations;
    }
    std::array<int, N + 1> order;
    res.status = Status::budget;
    while (res.evaluations < opt.max_evaluations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return values[a] < values[b]; });
        const int best = order[0];
        const int worst = order[N];
        const int second = order[N - 1];
        if (std::isfinite(values[worst]) &&
            values[worst] - values[best] <= opt.ftol * std::max(std::abs(values[best]), 1e-300)) {
            res.status = Status::converged;
            break;
        }
        Vec<N> centroid = Vec<N>::Zero();
        for (int i = 0; i <= N; ++i) {
            if (i != worst) centroid += simplex[i];
        }
        centroid /= N;
        const Vec<N> reflected = centroid + (centroid - simplex[worst]);
        const double f_r = f(reflected);
        ++res.evaluations;
        if (f_r < values[best]) {
            const Vec<N> expanded = centroid + 2.0 * (centroid - simplex[worst]);
            const double f_e = f(expanded);
            ++res.evaluations;
            if (f_e < f_r) {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
        } else if (f_r < values[second]) {
            simplex[worst] = reflected;
            values[worst] = f_r;
        } else {
            const bool outside = f_r < values[worst];
            const Vec<N> contracted = outside ? Vec<N>(centroid + 0.5 * (reflected - centroid))
                                              : Vec<N>(centroid + 0.5 * (simplex[worst] - centroid));
            const double f_c = f(contracted);
            ++res.evaluations;
            if (f_c < (outside ? f_r : values[worst])) {
                simplex[worst] = contracted;
                values[worst] = f_c;
            } else {
                for (int i = 0; i <= N; ++i) {
                    if (i == best) continue;
                    simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
                    values[i] = f(simplex[i]);
                    ++res.evaluations;
                }
            }
        }
    }
    const auto best = std::min_element(values.begin(), values.end()) - values.begin();
    res.x = simplex[best];
    res.value = values[best];
    return res;
}

}  // namespace epimix::optim
