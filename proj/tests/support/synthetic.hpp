#pragma once

// Synthetic datasets and partition-agreement helpers shared by the test suites.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "epimix/mixture_core.hpp"
#include "epimix/random.hpp"

namespace epimix::testing {

/// Three well separated, low-noise components on a [0, 1) time axis (60 days per unit).
inline MixtureModel three_group_truth() {
    MixtureModel m;
    m.time_scale = 60.0;
    m.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    m.components = {
        {{{150.0, 20.0, 10.0, 1.5}, {8.0, 30.0, 9.0, 1.2}}, Covariance2(0.3, 0.016, 0.7)},
        {{{500.0, 25.0, 11.0, 1.3}, {30.0, 40.0, 10.0, 1.1}}, Covariance2(1.0, 0.06, 0.8)},
        {{{1500.0, 30.0, 12.0, 1.2}, {120.0, 50.0, 11.0, 1.0}}, Covariance2(3.0, 0.24, 0.75)},
    };
    return m;
}

/// First two components of three_group_truth, reweighted.
inline MixtureModel two_group_truth() {
    auto m = three_group_truth();
    m.components.pop_back();
    m.weights = {0.5, 0.5};
    return m;
}

/// Same curves with every noise SD multiplied by `factor`.
inline MixtureModel with_noise_scaled(MixtureModel m, double factor) {
    for (auto& c : m.components) c.sigma = Covariance2(factor * c.sigma.sd_cases(), factor * c.sigma.sd_deaths(), c.sigma.rho());
    return m;
}

struct SyntheticData {
    std::vector<Block> blocks;
    std::vector<std::size_t> labels;
};

/// `n_blocks` blocks with labels cycling through the components (so every
/// component is populated), lengths uniform in [n_min, n_max] and times i / 60.
inline SyntheticData make_dataset(const MixtureModel& truth, std::size_t n_blocks, std::uint64_t seed,
                                  int n_min = 30, int n_max = 60) {
    SyntheticData out;
    Rng rng(seed);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        const std::size_t label = b % truth.K();
        const int n = n_min + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n_max - n_min + 1)));
        std::vector<double> times(n);
        for (int i = 0; i < n; ++i) times[i] = i / 60.0;
        char id[32];
        std::snprintf(id, sizeof id, "r%03zu", b);
        out.blocks.push_back(sample_component_block(truth, label, times, rng(), id));
        out.labels.push_back(label);
    }
    return out;
}

/// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<std::size_t>& x, const std::vector<std::size_t>& y) {
    std::map<std::pair<std::size_t, std::size_t>, double> joint;
    std::map<std::size_t, double> rows;
    std::map<std::size_t, double> cols;
    for (std::size_t i = 0; i < x.size(); ++i) {
        joint[{x[i], y[i]}] += 1.0;
        rows[x[i]] += 1.0;
        cols[y[i]] += 1.0;
    }
    auto pairs = [](double n) { return n * (n - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [key, n] : joint) index += pairs(n);
    double a = 0.0;
    double b = 0.0;
    for (const auto& [key, n] : rows) a += pairs(n);
    for (const auto& [key, n] : cols) b += pairs(n);
    const double expected = a * b / pairs(static_cast<double>(x.size()));
    const double max_index = 0.5 * (a + b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace epimix::testing
