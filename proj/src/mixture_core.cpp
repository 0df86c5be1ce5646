#include "epimix/mixture_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "epimix/random.hpp"

namespace epimix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

}  // namespace

Covariance2::Covariance2(double sd_cases, double sd_deaths, double rho)
    : sd_cases_(sd_cases), sd_deaths_(sd_deaths), rho_(rho) {
    if (!(std::isfinite(sd_cases) && sd_cases > 0.0 && std::isfinite(sd_deaths) && sd_deaths > 0.0 &&
          std::isfinite(rho) && std::abs(rho) < 1.0)) {
        throw std::invalid_argument("covariance is not symmetric positive definite");
    }
}

std::optional<Covariance2> Covariance2::from_entries(double var_cases, double var_deaths, double cov) {
    if (!(std::isfinite(var_cases) && std::isfinite(var_deaths) && std::isfinite(cov))) return std::nullopt;
    if (!(var_cases > 0.0 && var_deaths > 0.0) || !(cov * cov < var_cases * var_deaths)) return std::nullopt;
    const double s1 = std::sqrt(var_cases);
    const double s2 = std::sqrt(var_deaths);
    const double rho = cov / (s1 * s2);
    if (!(s1 > 0.0 && s2 > 0.0 && std::abs(rho) < 1.0)) return std::nullopt;
    return Covariance2(s1, s2, rho);
}

double Covariance2::log_det() const {
    return 2.0 * std::log(sd_cases_) + 2.0 * std::log(sd_deaths_) + std::log1p(-rho_ * rho_);
}

std::pair<double, double> Covariance2::eigenvalues() const {
    const double v1 = var_cases();
    const double v2 = var_deaths();
    const double c = cov();
    const double half_diff = 0.5 * (v1 - v2);
    const double hi = 0.5 * (v1 + v2) + std::hypot(half_diff, c);
    // det / hi keeps the small eigenvalue accurate when the matrix is nearly singular
    const double det = v1 * v2 * (1.0 - rho_) * (1.0 + rho_);
    return {hi > 0.0 ? det / hi : 0.0, hi};
}

void MixtureModel::validate(double weight_sum_tol) const {
    if (components.empty()) throw std::invalid_argument("mixture needs at least one component");
    if (weights.size() != components.size()) {
        throw std::invalid_argument("mixture has " + std::to_string(weights.size()) + " weights for " +
                                    std::to_string(components.size()) + " components");
    }
    if (!(std::isfinite(time_scale) && time_scale > 0.0)) throw std::invalid_argument("time scale must be positive");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("mixture weight outside (0, 1]");
        sum += w;
    }
    if (!(std::abs(sum - 1.0) <= weight_sum_tol)) {
        throw std::invalid_argument("mixture weights sum to " + std::to_string(sum));
    }
    for (const auto& c : components) c.curve.validate();
}

Posteriors::Posteriors(std::vector<std::string> region_ids, std::size_t K)
    : region_ids_(std::move(region_ids)), K_(K), values_(region_ids_.size() * K, 0.0) {}

double Posteriors::block_mass(std::size_t k) const {
    double mass = 0.0;
    for (std::size_t b = 0; b < blocks(); ++b) mass += at(b, k);
    return mass;
}

double log_density_bivariate(Observation y, std::pair<double, double> mu, const Covariance2& sigma) {
    const double z1 = (y.cases - mu.first) / sigma.sd_cases();
    const double z2 = (y.deaths - mu.second) / sigma.sd_deaths();
    const double rho = sigma.rho();
    const double one_minus_rho2 = (1.0 - rho) * (1.0 + rho);
    const double maha = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / one_minus_rho2;
    return -kLog2Pi - 0.5 * sigma.log_det() - 0.5 * maha;
}

double block_log_score(const Block& block, double weight, const Component& comp) {
    double score = static_cast<double>(block.size()) * std::log(weight);
    for (std::size_t i = 0; i < block.size(); ++i) {
        score += log_density_bivariate(block.obs[i], eval_curve(block.times[i], comp.curve), comp.sigma);
    }
    return score;
}

double softmax_in_place(std::span<double> scores) {
    const double top = *std::max_element(scores.begin(), scores.end());
    if (!std::isfinite(top)) {
        // all -inf (or a +inf/NaN score): no meaningful normalization
        std::fill(scores.begin(), scores.end(), 1.0 / static_cast<double>(scores.size()));
        return top;
    }
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - top);
        sum += s;
    }
    for (double& s : scores) s /= sum;
    return top + std::log(sum);
}

PosteriorRow posterior_row(const Block& block, const MixtureModel& model) {
    PosteriorRow row;
    row.tau.resize(model.K());
    for (std::size_t k = 0; k < model.K(); ++k) {
        row.tau[k] = block_log_score(block, model.weights[k], model.components[k]);
    }
    row.log_normalizer = softmax_in_place(row.tau);
    return row;
}

double loglik(std::span<const Block> blocks, const MixtureModel& model) {
    if (blocks.empty()) throw std::invalid_argument("log-likelihood of an empty dataset");
    double total = 0.0;
    for (const auto& b : blocks) total += posterior_row(b, model).log_normalizer;
    return total;
}

std::vector<Assignment> classify(const Posteriors& post) {
    std::vector<Assignment> out;
    out.reserve(post.blocks());
    for (std::size_t b = 0; b < post.blocks(); ++b) {
        const auto row = post.row(b);
        // max_element returns the first maximum, which is the tie rule
        const auto best = std::max_element(row.begin(), row.end());
        out.push_back({post.region_ids()[b], static_cast<std::size_t>(best - row.begin()), *best});
    }
    return out;
}

Block sample_component_block(const MixtureModel& model, std::size_t k, std::span<const double> times,
                             std::uint64_t seed, std::string region_id) {
    if (k >= model.K()) throw std::invalid_argument("component index out of range");
    Rng rng(seed);
    const auto& comp = model.components[k];
    // Cholesky factor of [[s1^2, rho s1 s2], [rho s1 s2, s2^2]]
    const double l11 = comp.sigma.sd_cases();
    const double l21 = comp.sigma.rho() * comp.sigma.sd_deaths();
    const double l22 = comp.sigma.sd_deaths() * std::sqrt((1.0 - comp.sigma.rho()) * (1.0 + comp.sigma.rho()));
    Block block;
    block.region_id = std::move(region_id);
    for (double t : times) {
        const auto [m1, m2] = eval_curve(t, comp.curve);
        const double z1 = standard_normal(rng);
        const double z2 = standard_normal(rng);
        block.times.push_back(t);
        block.obs.push_back({m1 + l11 * z1, m2 + l21 * z1 + l22 * z2});
    }
    return block;
}

SampledBlock sample_block(const MixtureModel& model, std::span<const double> times, std::uint64_t seed,
                          std::string region_id) {
    model.validate();
    Rng rng(seed);
    const double u = uniform01(rng);
    std::size_t label = model.K() - 1;
    double cumulative = 0.0;
    for (std::size_t k = 0; k < model.K(); ++k) {
        cumulative += model.weights[k];
        if (u < cumulative) {
            label = k;
            break;
        }
    }
    return {sample_component_block(model, label, times, mix64(seed), std::move(region_id)), label};
}

}  // namespace epimix
