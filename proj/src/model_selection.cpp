#include "epimix/model_selection.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "epimix/random.hpp"

namespace epimix {

int SweepConfig::starts_for(int K) { return K <= 1 ? 10 : std::min(20 * K, 100); }

void SweepConfig::validate() const {
    if (k_min < 1 || k_max < k_min) throw std::invalid_argument("mixture order range must satisfy 1 <= kmin <= kmax");
    em.validate();
}

namespace {

LogisticParams moment_guess(std::span<const Block* const> group, bool cases, double c) {
    auto value = [cases](const Observation& o) { return cases ? o.cases : o.deaths; };
    double top = 0.0;
    for (const Block* b : group) {
        for (const auto& o : b->obs) top = std::max(top, value(o));
    }
    double t_half = 0.0;
    if (top > 0.0) {
        double sum = 0.0;
        int count = 0;
        for (const Block* b : group) {
            for (std::size_t i = 0; i < b->size(); ++i) {
                if (value(b->obs[i]) >= 0.5 * top) {
                    sum += b->times[i];
                    ++count;
                    break;
                }
            }
        }
        t_half = sum / count;
    }
    LogisticParams p;
    p.a = top > 0.0 ? 1.1 * top : 1e-6;
    p.gamma = 1.0;
    p.c = c;
    // with gamma = 1 the inflection sits at log(b) / c
    p.b = std::exp(std::clamp(c * t_half, -700.0, 700.0));
    return p;
}

}  // namespace

MixtureModel random_init(std::span<const Block> blocks, int K, std::uint64_t seed, double time_scale) {
    if (K < 1) throw std::invalid_argument("mixture order must be at least 1");
    if (static_cast<std::size_t>(K) > blocks.size()) {
        throw std::invalid_argument("mixture order " + std::to_string(K) + " exceeds the number of blocks (" +
                                    std::to_string(blocks.size()) + ")");
    }
    Rng rng(seed);

    // k-means++ seeding on log peak levels, then nearest-seed assignment
    std::vector<std::array<double, 2>> feature(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        double m1 = 0.0;
        double m2 = 0.0;
        for (const auto& o : blocks[i].obs) {
            m1 = std::max(m1, o.cases);
            m2 = std::max(m2, o.deaths);
        }
        feature[i] = {std::log1p(std::max(m1, 0.0)), std::log1p(std::max(m2, 0.0))};
    }
    auto dist2 = [&](std::size_t i, std::size_t j) {
        const double d1 = feature[i][0] - feature[j][0];
        const double d2 = feature[i][1] - feature[j][1];
        return d1 * d1 + d2 * d2;
    };
    std::vector<std::size_t> seeds{uniform_index(rng, blocks.size())};
    std::vector<double> nearest(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) nearest[i] = dist2(i, seeds[0]);
    std::vector<bool> taken(blocks.size(), false);
    taken[seeds[0]] = true;
    while (seeds.size() < static_cast<std::size_t>(K)) {
        double total = 0.0;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (!taken[i]) total += nearest[i];
        }
        std::size_t pick = blocks.size();
        if (total > 0.0) {
            double u = uniform01(rng) * total;
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                if (taken[i] || nearest[i] <= 0.0) continue;
                pick = i;
                u -= nearest[i];
                if (u < 0.0) break;
            }
        }
        if (pick == blocks.size()) {
            // identical features left: pick uniformly among untaken blocks
            std::vector<std::size_t> free;
            for (std::size_t i = 0; i < blocks.size(); ++i) {
                if (!taken[i]) free.push_back(i);
            }
            pick = free[uniform_index(rng, free.size())];
        }
        taken[pick] = true;
        seeds.push_back(pick);
        for (std::size_t i = 0; i < blocks.size(); ++i) nearest[i] = std::min(nearest[i], dist2(i, pick));
    }
    std::vector<std::vector<const Block*>> groups(K);
    for (int g = 0; g < K; ++g) groups[g].push_back(&blocks[seeds[g]]);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (taken[i]) continue;
        std::size_t best = 0;
        for (std::size_t g = 1; g < seeds.size(); ++g) {
            if (dist2(i, seeds[g]) < dist2(i, seeds[best])) best = g;
        }
        groups[best].push_back(&blocks[i]);
    }

    MixtureModel model;
    model.time_scale = time_scale;
    model.weights.assign(K, 1.0 / K);
    const double log_c_max = std::log(30.0);
    double rss_cases = 0.0;
    double rss_deaths = 0.0;
    std::size_t points = 0;
    std::vector<BivariateCurve> curves;
    for (const auto& group : groups) {
        const double c_cases = std::exp(uniform01(rng) * log_c_max);
        const double c_deaths = std::exp(uniform01(rng) * log_c_max);
        BivariateCurve curve{moment_guess(group, true, c_cases), moment_guess(group, false, c_deaths)};
        for (const Block* b : group) {
            for (std::size_t i = 0; i < b->size(); ++i) {
                const auto [h1, h2] = eval_curve(b->times[i], curve);
                rss_cases += (b->obs[i].cases - h1) * (b->obs[i].cases - h1);
                rss_deaths += (b->obs[i].deaths - h2) * (b->obs[i].deaths - h2);
                ++points;
            }
        }
        curves.push_back(curve);
    }
    auto inflated_sd = [points](double rss) {
        const double var = 2.0 * rss / static_cast<double>(points);
        return std::sqrt(var > 0.0 && std::isfinite(var) ? var : 1e-6);
    };
    const Covariance2 sigma(inflated_sd(rss_cases), inflated_sd(rss_deaths), 0.0);
    for (const auto& curve : curves) model.components.push_back({curve, sigma});
    return model;
}

double bic_sample_size(std::span<const Block> blocks, BicSampleSize mode) {
    if (mode == BicSampleSize::blocks) return static_cast<double>(blocks.size());
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return static_cast<double>(n);
}

double bic(double loglik, int K, double n) { return -2.0 * loglik + free_parameter_count(K) * std::log(n); }

double bic(double loglik, int K, std::span<const Block> blocks, BicSampleSize mode) {
    return bic(loglik, K, bic_sample_size(blocks, mode));
}

const OrderResult& SweepResult::chosen() const {
    for (const auto& r : per_k) {
        if (r.K == chosen_K) return r;
    }
    throw std::logic_error("sweep result has no chosen order");
}

SweepResult sweep(std::span<const Block> blocks, const SweepConfig& config, double time_scale) {
    config.validate();
    if (blocks.empty()) throw std::invalid_argument("sweep needs at least one block");
    if (static_cast<std::size_t>(config.k_max) > blocks.size()) {
        throw std::invalid_argument("kmax " + std::to_string(config.k_max) + " exceeds the number of blocks (" +
                                    std::to_string(blocks.size()) + ")");
    }

    struct Job {
        int K;
        int start;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (int K = config.k_min; K <= config.k_max; ++K) {
        for (int s = 0; s < SweepConfig::starts_for(K); ++s) jobs.push_back({K, s, derive_seed(config.seed, K, s)});
    }

    std::vector<std::optional<FitResult>> fits(jobs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            try {
                const auto init = random_init(blocks, jobs[j].K, jobs[j].seed, time_scale);
                fits[j] = em_fit(blocks, init, config.em);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(config.threads, jobs.size()));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    SweepResult result;
    const double n = bic_sample_size(blocks, config.bic_n);
    std::size_t j = 0;
    for (int K = config.k_min; K <= config.k_max; ++K) {
        OrderResult order;
        order.K = K;
        for (int s = 0; s < SweepConfig::starts_for(K); ++s, ++j) {
            auto& fit = *fits[j];
            result.restarts.push_back({K, s, jobs[j].seed, fit.loglik, fit.trace.iterations, fit.trace.termination,
                                       fit.trace.reason});
            if (fit.spurious()) {
                ++order.n_spurious;
            } else if (!order.best || fit.loglik > order.best->loglik) {
                order.best = std::move(fit);
                order.retained_start = s;
            }
        }
        if (order.best) order.bic = bic(order.best->loglik, K, n);
        result.per_k.push_back(std::move(order));
    }

    for (const auto& r : result.per_k) {
        if (r.bic && (result.chosen_K == 0 || *r.bic < *result.chosen().bic)) result.chosen_K = r.K;
    }
    if (result.chosen_K == 0) throw AllSpuriousError("every start of every mixture order was spurious");
    return result;
}

FitResult warm_refit(const MixtureModel& previous, std::span<const Block> new_blocks, const EmConfig& config) {
    return em_fit(new_blocks, previous, config);
}

}  // namespace epimix
