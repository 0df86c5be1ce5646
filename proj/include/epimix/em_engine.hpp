#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "epimix/data_pipeline.hpp"
#include "epimix/mixture_core.hpp"

namespace epimix {

struct EmConfig {
    double tol = 1e-6;  ///< relative log-likelihood change that ends the iteration
    int max_iter = 1000;
    int optimizer_max_evals = 2000;  ///< per component per M-step
    double spurious_min_eigen_ratio = 1e-8;
    double spurious_min_weight_blocks = 1.0;

    void validate() const;
};

enum class Termination { converged, max_iter, spurious };

enum class SpuriousReason {
    none,
    collapsed_covariance,  ///< eigenvalue ratio below the threshold
    empty_component,       ///< posterior block mass below the threshold
    singular_update,       ///< covariance M-step produced a non-SPD matrix
    non_finite,            ///< NaN or infinity in the likelihood or objective
};

std::string_view to_string(Termination t);
std::string_view to_string(SpuriousReason r);

struct EmTrace {
    std::vector<double> loglik_per_iter;  ///< entry 0 is the initial model
    int iterations = 0;                   ///< completed M-steps
    Termination termination = Termination::max_iter;
    SpuriousReason reason = SpuriousReason::none;
};

struct FitResult {
    MixtureModel model;
    Posteriors posteriors;
    std::vector<Assignment> assignments;
    double loglik = 0.0;
    EmTrace trace;

    bool spurious() const { return trace.termination == Termination::spurious; }
};

struct EStepResult {
    Posteriors posteriors;
    double loglik = 0.0;
};

/// Block posteriors tau_bk proportional to pi_k^{n_b} prod_i phi2(y_bi; h(t_bi; theta_k), Sigma_k),
/// with the observed-data log-likelihood.
EStepResult e_step(std::span<const Block> blocks, const MixtureModel& model);

/// pi_k = sum_b n_b tau_bk / sum_b n_b.
std::vector<double> m_step_weights(const Posteriors& post, std::span<const Block> blocks);

struct CovarianceEntries {
    double var_cases = 0.0;
    double var_deaths = 0.0;
    double cov = 0.0;
};

struct SigmaUpdate {
    std::vector<CovarianceEntries> entries;
    /// Empty where the denominator vanished or the matrix is not SPD.
    std::vector<std::optional<Covariance2>> sigmas;

    bool spurious() const;
};

/// Weighted residual outer-product average per component, at `curves`.
SigmaUpdate m_step_sigma(const Posteriors& post, std::span<const Block> blocks, std::span<const BivariateCurve> curves);

/// sum_b tau_bk sum_i r_bi^T Sigma^{-1} r_bi with r_bi = y_bi - h(t_bi; curve).
/// Minimizing it over the curve maximizes the expected complete-data log-likelihood.
double q_tilde(const Posteriors& post, std::span<const Block> blocks, std::size_t k, const Covariance2& sigma,
               const BivariateCurve& curve);

struct ThetaUpdate {
    std::vector<BivariateCurve> curves;
    bool non_finite = false;
};

/// Per component, minimizes q_tilde in log-parameter space starting at
/// init_curves (Levenberg-Marquardt, Nelder-Mead when it stalls). A result
/// is kept only if it lowers q_tilde; otherwise the initial curve is returned.
ThetaUpdate m_step_theta(const Posteriors& post, std::span<const Block> blocks, std::span<const Covariance2> sigmas,
                         std::span<const BivariateCurve> init_curves, int max_evaluations = 2000);

/// Collapsed covariance (min eigenvalue over the largest eigenvalue of any
/// component below the ratio) or an empty component (block mass below the
/// minimum).
SpuriousReason spurious_reason(const MixtureModel& model, const Posteriors& post, const EmConfig& config);
bool detect_spurious(const MixtureModel& model, const Posteriors& post, std::span<const Block> blocks,
                     const EmConfig& config);

/// Block-constrained EM from `init`. Each iteration updates the weights, then
/// the curves under the previous covariances, then the covariances at the new
/// curves. A spurious solution ends the run with Termination::spurious.
FitResult em_fit(std::span<const Block> blocks, const MixtureModel& init, const EmConfig& config = {});

}  // namespace epimix
