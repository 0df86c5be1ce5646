#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epimix/data_pipeline.hpp"
#include "epimix/growth_model.hpp"

namespace epimix {

/// 2x2 covariance of the (cases, deaths) residuals.
///
/// Held in the reporting form (sigma1, sigma2, rho) and expanded to matrix
/// entries on demand, so a model written with full precision reads back
/// bit-identically.
class Covariance2 {
public:
    Covariance2() = default;
    /// Throws std::invalid_argument unless sd_cases, sd_deaths > 0 and |rho| < 1.
    Covariance2(double sd_cases, double sd_deaths, double rho);

    /// From matrix entries; nothing when the matrix is not symmetric positive definite.
    static std::optional<Covariance2> from_entries(double var_cases, double var_deaths, double cov);

    static Covariance2 identity() { return {1.0, 1.0, 0.0}; }

    double sd_cases() const { return sd_cases_; }
    double sd_deaths() const { return sd_deaths_; }
    double rho() const { return rho_; }

    double var_cases() const { return sd_cases_ * sd_cases_; }
    double var_deaths() const { return sd_deaths_ * sd_deaths_; }
    double cov() const { return rho_ * sd_cases_ * sd_deaths_; }

    double log_det() const;
    /// Eigenvalues of the matrix, ascending.
    std::pair<double, double> eigenvalues() const;

    friend bool operator==(const Covariance2&, const Covariance2&) = default;

private:
    double sd_cases_ = 1.0;
    double sd_deaths_ = 1.0;
    double rho_ = 0.0;
};

struct Component {
    BivariateCurve curve;
    Covariance2 sigma;
    friend bool operator==(const Component&, const Component&) = default;
};

struct MixtureModel {
    std::vector<double> weights;
    std::vector<Component> components;
    double time_scale = 1.0;

    std::size_t K() const { return components.size(); }

    /// Throws std::invalid_argument when the invariants fail: K >= 1, matching
    /// lengths, weights in (0, 1] summing to one within `weight_sum_tol`,
    /// positive logistic parameters and time scale.
    void validate(double weight_sum_tol = 1e-12) const;

    friend bool operator==(const MixtureModel&, const MixtureModel&) = default;
};

/// Free parameters of a K-component model: 8 logistic + 3 covariance per
/// component, plus K - 1 weights.
constexpr int free_parameter_count(int K) { return 12 * K - 1; }

/// B x K matrix of block membership probabilities, rows aligned with region_ids.
class Posteriors {
public:
    Posteriors() = default;
    Posteriors(std::vector<std::string> region_ids, std::size_t K);

    std::size_t blocks() const { return region_ids_.size(); }
    std::size_t K() const { return K_; }
    const std::vector<std::string>& region_ids() const { return region_ids_; }

    double& at(std::size_t b, std::size_t k) { return values_[b * K_ + k]; }
    double at(std::size_t b, std::size_t k) const { return values_[b * K_ + k]; }
    std::span<const double> row(std::size_t b) const { return {values_.data() + b * K_, K_}; }
    std::span<double> row(std::size_t b) { return {values_.data() + b * K_, K_}; }

    /// Column sum: effective number of blocks in component k.
    double block_mass(std::size_t k) const;

    friend bool operator==(const Posteriors&, const Posteriors&) = default;

private:
    std::vector<std::string> region_ids_;
    std::size_t K_ = 0;
    std::vector<double> values_;
};

/// Log of the bivariate normal density at y with mean mu.
double log_density_bivariate(Observation y, std::pair<double, double> mu, const Covariance2& sigma);

/// n_b log(weight) + sum_i log phi2(y_bi; h(t_bi), Sigma): the log of the
/// E-step numerator for one block and one component.
double block_log_score(const Block& block, double weight, const Component& comp);

struct PosteriorRow {
    std::vector<double> tau;
    double log_normalizer = 0.0;  ///< the block's log-likelihood contribution
};

/// Softmax of block_log_score over components, with its log-sum-exp.
PosteriorRow posterior_row(const Block& block, const MixtureModel& model);

/// Normalizes log scores in place to probabilities and returns their log-sum-exp.
double softmax_in_place(std::span<double> log_scores);

/// Observed-data log-likelihood, sum over blocks of log sum_k exp(score_bk).
double loglik(std::span<const Block> blocks, const MixtureModel& model);

struct Assignment {
    std::string region_id;
    std::size_t label = 0;  ///< zero-based component index
    double max_posterior = 0.0;
};

/// Bayes rule: argmax of each row, ties to the smallest index.
std::vector<Assignment> classify(const Posteriors& post);

struct SampledBlock {
    Block block;
    std::size_t label = 0;
};

/// Draws a label from the weights, then y_i = h(t_i) + L z_i with L the
/// Cholesky factor of that component's covariance. `times` must be increasing.
SampledBlock sample_block(const MixtureModel& model, std::span<const double> times, std::uint64_t seed,
                          std::string region_id = "synthetic");

/// As sample_block with the label fixed to `k`.
Block sample_component_block(const MixtureModel& model, std::size_t k, std::span<const double> times,
                             std::uint64_t seed, std::string region_id = "synthetic");

}  // namespace epimix
