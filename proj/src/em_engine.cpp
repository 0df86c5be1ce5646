#include "epimix/em_engine.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "epimix/optimize.hpp"

namespace epimix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxLogParam = 700.0;

// L^{-1} for the Cholesky factor L of a covariance; whitened residuals are
// e1 = r1 / l11 and e2 = (r2 - l21 e1) / l22, so |e|^2 = r^T Sigma^{-1} r.
struct Whitener {
    double l11;
    double l21;
    double l22;

    explicit Whitener(const Covariance2& s)
        : l11(s.sd_cases()),
          l21(s.rho() * s.sd_deaths()),
          l22(s.sd_deaths() * std::sqrt((1.0 - s.rho()) * (1.0 + s.rho()))) {}
};

using Params8 = optim::Vec<8>;

Params8 to_log_vector(const BivariateCurve& c) {
    const auto a = c.cases.to_log();
    const auto b = c.deaths.to_log();
    Params8 p;
    p << a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3];
    return p;
}

bool in_domain(const Params8& p) { return p.allFinite() && p.cwiseAbs().maxCoeff() <= kMaxLogParam; }

BivariateCurve from_log_vector(const Params8& p) {
    return {LogisticParams::from_log({p(0), p(1), p(2), p(3)}), LogisticParams::from_log({p(4), p(5), p(6), p(7)})};
}

// The blocks that carry weight in component k, with their posterior.
struct WeightedBlock {
    const Block* block;
    double tau;
};

std::vector<WeightedBlock> active_blocks(const Posteriors& post, std::span<const Block> blocks, std::size_t k) {
    std::vector<WeightedBlock> out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (post.at(b, k) > 0.0) out.push_back({&blocks[b], post.at(b, k)});
    }
    return out;
}

double weighted_mahalanobis(std::span<const WeightedBlock> active, const Whitener& w, const BivariateCurve& curve) {
    double total = 0.0;
    for (const auto& [block, tau] : active) {
        double sum = 0.0;
        for (std::size_t i = 0; i < block->size(); ++i) {
            const auto [h1, h2] = eval_curve(block->times[i], curve);
            const double e1 = (block->obs[i].cases - h1) / w.l11;
            const double e2 = (block->obs[i].deaths - h2 - w.l21 * e1) / w.l22;
            sum += e1 * e1 + e2 * e2;
        }
        total += tau * sum;
    }
    return total;
}

double linearize(std::span<const WeightedBlock> active, const Whitener& w, const Params8& p, optim::Mat<8>& jtj,
                 optim::Vec<8>& jte) {
    jtj.setZero();
    jte.setZero();
    if (!in_domain(p)) return kInf;
    const auto curve = from_log_vector(p);
    double total = 0.0;
    Params8 j1;
    Params8 j2;
    for (const auto& [block, tau] : active) {
        for (std::size_t i = 0; i < block->size(); ++i) {
            const auto g1 = eval_logistic_log_gradient(block->times[i], curve.cases);
            const auto g2 = eval_logistic_log_gradient(block->times[i], curve.deaths);
            const double e1 = (block->obs[i].cases - g1.value) / w.l11;
            const double e2 = (block->obs[i].deaths - g2.value - w.l21 * e1) / w.l22;
            for (int j = 0; j < 4; ++j) {
                j1(j) = -g1.d_log[j] / w.l11;
                j1(j + 4) = 0.0;
                j2(j) = w.l21 * g1.d_log[j] / (w.l11 * w.l22);
                j2(j + 4) = -g2.d_log[j] / w.l22;
            }
            jtj.noalias() += tau * (j1 * j1.transpose() + j2 * j2.transpose());
            jte.noalias() += tau * (e1 * j1 + e2 * j2);
            total += tau * (e1 * e1 + e2 * e2);
        }
    }
    return std::isfinite(total) ? total : kInf;
}

}  // namespace

void EmConfig::validate() const {
    if (!(tol > 0.0) || max_iter <= 0 || optimizer_max_evals <= 0 || !(spurious_min_eigen_ratio > 0.0) ||
        !(spurious_min_weight_blocks > 0.0)) {
        throw std::invalid_argument("EM configuration values must be positive");
    }
}

std::string_view to_string(Termination t) {
    switch (t) {
        case Termination::converged: return "converged";
        case Termination::max_iter: return "max_iter";
        case Termination::spurious: return "spurious";
    }
    return "unknown";
}

std::string_view to_string(SpuriousReason r) {
    switch (r) {
        case SpuriousReason::none: return "none";
        case SpuriousReason::collapsed_covariance: return "collapsed_covariance";
        case SpuriousReason::empty_component: return "empty_component";
        case SpuriousReason::singular_update: return "singular_update";
        case SpuriousReason::non_finite: return "non_finite";
    }
    return "unknown";
}

EStepResult e_step(std::span<const Block> blocks, const MixtureModel& model) {
    std::vector<std::string> ids;
    ids.reserve(blocks.size());
    for (const auto& b : blocks) ids.push_back(b.region_id);
    EStepResult out{Posteriors(std::move(ids), model.K()), 0.0};
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto row = out.posteriors.row(b);
        for (std::size_t k = 0; k < model.K(); ++k) {
            row[k] = block_log_score(blocks[b], model.weights[k], model.components[k]);
        }
        out.loglik += softmax_in_place(row);
    }
    return out;
}

std::vector<double> m_step_weights(const Posteriors& post, std::span<const Block> blocks) {
    std::vector<double> weights(post.K(), 0.0);
    double total = 0.0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto n = static_cast<double>(blocks[b].size());
        total += n;
        for (std::size_t k = 0; k < post.K(); ++k) weights[k] += n * post.at(b, k);
    }
    for (double& w : weights) w /= total;
    return weights;
}

bool SigmaUpdate::spurious() const {
    for (const auto& s : sigmas) {
        if (!s) return true;
    }
    return false;
}

SigmaUpdate m_step_sigma(const Posteriors& post, std::span<const Block> blocks, std::span<const BivariateCurve> curves) {
    SigmaUpdate out;
    for (std::size_t k = 0; k < post.K(); ++k) {
        double s11 = 0.0;
        double s22 = 0.0;
        double s12 = 0.0;
        double mass = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const double tau = post.at(b, k);
            if (tau == 0.0) continue;
            double a11 = 0.0;
            double a22 = 0.0;
            double a12 = 0.0;
            for (std::size_t i = 0; i < blocks[b].size(); ++i) {
                const auto [h1, h2] = eval_curve(blocks[b].times[i], curves[k]);
                const double r1 = blocks[b].obs[i].cases - h1;
                const double r2 = blocks[b].obs[i].deaths - h2;
                a11 += r1 * r1;
                a22 += r2 * r2;
                a12 += r1 * r2;
            }
            s11 += tau * a11;
            s22 += tau * a22;
            s12 += tau * a12;
            mass += tau * static_cast<double>(blocks[b].size());
        }
        if (mass > 0.0) {
            out.entries.push_back({s11 / mass, s22 / mass, s12 / mass});
            out.sigmas.push_back(Covariance2::from_entries(s11 / mass, s22 / mass, s12 / mass));
        } else {
            out.entries.push_back({});
            out.sigmas.push_back(std::nullopt);
        }
    }
    return out;
}

double q_tilde(const Posteriors& post, std::span<const Block> blocks, std::size_t k, const Covariance2& sigma,
               const BivariateCurve& curve) {
    const auto active = active_blocks(post, blocks, k);
    return weighted_mahalanobis(active, Whitener(sigma), curve);
}

ThetaUpdate m_step_theta(const Posteriors& post, std::span<const Block> blocks, std::span<const Covariance2> sigmas,
                         std::span<const BivariateCurve> init_curves, int max_evaluations) {
    ThetaUpdate out;
    out.curves.assign(init_curves.begin(), init_curves.end());
    for (std::size_t k = 0; k < post.K(); ++k) {
        const auto active = active_blocks(post, blocks, k);
        if (active.empty()) continue;
        const Whitener white(sigmas[k]);
        const Params8 start = to_log_vector(init_curves[k]);
        const double f0 = weighted_mahalanobis(active, white, init_curves[k]);
        if (!std::isfinite(f0)) {
            out.non_finite = true;
            continue;
        }

        auto objective = [&](const Params8& p) {
            if (!in_domain(p)) return kInf;
            const double f = weighted_mahalanobis(active, white, from_log_vector(p));
            return std::isfinite(f) ? f : kInf;
        };
        auto lin = [&](const Params8& p, optim::Mat<8>& jtj, optim::Vec<8>& jte) {
            return linearize(active, white, p, jtj, jte);
        };
        optim::LmOptions lm;
        lm.max_evaluations = max_evaluations;
        auto best = optim::levenberg_marquardt<8>(start, lin, objective, lm);

        // Nelder-Mead only when Levenberg-Marquardt stalled away from a stationary point.
        const int remaining = max_evaluations - best.evaluations;
        if (best.status == optim::Status::stalled && !(best.value < f0) && remaining > 9 &&
            best.gradient_norm > 1e-6 * std::max(best.value, 1.0)) {
            optim::NelderMeadOptions nm;
            nm.max_evaluations = remaining;
            const auto fallback = optim::nelder_mead<8>(start, objective, nm);
            if (fallback.value < best.value) best = fallback;
        }
        if (best.value < f0 && in_domain(best.x)) out.curves[k] = from_log_vector(best.x);
    }
    return out;
}

SpuriousReason spurious_reason(const MixtureModel& model, const Posteriors& post, const EmConfig& config) {
    double largest = 0.0;
    for (const auto& c : model.components) largest = std::max(largest, c.sigma.eigenvalues().second);
    for (const auto& c : model.components) {
        if (!(c.sigma.eigenvalues().first >= config.spurious_min_eigen_ratio * largest)) {
            return SpuriousReason::collapsed_covariance;
        }
    }
    for (std::size_t k = 0; k < post.K(); ++k) {
        if (!(post.block_mass(k) >= config.spurious_min_weight_blocks)) return SpuriousReason::empty_component;
    }
    return SpuriousReason::none;
}

bool detect_spurious(const MixtureModel& model, const Posteriors& post, std::span<const Block> /*blocks*/,
                     const EmConfig& config) {
    return spurious_reason(model, post, config) != SpuriousReason::none;
}

FitResult em_fit(std::span<const Block> blocks, const MixtureModel& init, const EmConfig& config) {
    if (blocks.empty()) throw std::invalid_argument("EM needs at least one block");
    config.validate();
    init.validate();
    for (const auto& b : blocks) b.validate();

    FitResult fit;
    fit.model = init;
    auto e = e_step(blocks, fit.model);
    fit.trace.loglik_per_iter.push_back(e.loglik);

    auto stop_spurious = [&](SpuriousReason reason) {
        fit.trace.termination = Termination::spurious;
        fit.trace.reason = reason;
    };

    if (!std::isfinite(e.loglik)) {
        stop_spurious(SpuriousReason::non_finite);
    } else if (const auto reason = spurious_reason(fit.model, e.posteriors, config); reason != SpuriousReason::none) {
        stop_spurious(reason);
    } else {
        fit.trace.termination = Termination::max_iter;
        const std::size_t K = init.K();
        while (fit.trace.iterations < config.max_iter) {
            MixtureModel next;
            next.time_scale = fit.model.time_scale;
            next.weights = m_step_weights(e.posteriors, blocks);

            std::vector<BivariateCurve> curves(K);
            std::vector<Covariance2> sigmas(K);
            for (std::size_t k = 0; k < K; ++k) {
                curves[k] = fit.model.components[k].curve;
                sigmas[k] = fit.model.components[k].sigma;
            }
            auto theta = m_step_theta(e.posteriors, blocks, sigmas, curves, config.optimizer_max_evals);
            if (theta.non_finite) {
                stop_spurious(SpuriousReason::non_finite);
                break;
            }
            const auto sigma = m_step_sigma(e.posteriors, blocks, theta.curves);
            if (sigma.spurious()) {
                stop_spurious(SpuriousReason::singular_update);
                break;
            }
            for (std::size_t k = 0; k < K; ++k) next.components.push_back({theta.curves[k], *sigma.sigmas[k]});

            auto e_next = e_step(blocks, next);
            ++fit.trace.iterations;
            fit.trace.loglik_per_iter.push_back(e_next.loglik);
            const double previous = e.loglik;
            fit.model = std::move(next);
            e = std::move(e_next);

            if (!std::isfinite(e.loglik)) {
                stop_spurious(SpuriousReason::non_finite);
                break;
            }
            if (const auto reason = spurious_reason(fit.model, e.posteriors, config); reason != SpuriousReason::none) {
                stop_spurious(reason);
                break;
            }
            const double change = std::abs(e.loglik - previous);
            const bool converged =
                std::abs(previous) > 1e-12 ? change / std::abs(previous) < config.tol : change < 1e-12;
            if (converged) {
                fit.trace.termination = Termination::converged;
                break;
            }
        }
    }

    fit.posteriors = std::move(e.posteriors);
    fit.loglik = e.loglik;
    fit.assignments = classify(fit.posteriors);
    return fit;
}

}  // namespace epimix
