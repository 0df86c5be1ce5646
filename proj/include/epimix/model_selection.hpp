#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "epimix/em_engine.hpp"

namespace epimix {

/// Every start of every mixture order ended spurious.
class AllSpuriousError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class BicSampleSize {
    total_points,  ///< n = sum of block lengths
    blocks,        ///< n = number of blocks
};

struct SweepConfig {
    int k_min = 1;
    int k_max = 7;
    std::uint64_t seed = 0;
    BicSampleSize bic_n = BicSampleSize::total_points;
    EmConfig em;
    /// Worker threads for the restarts; results do not depend on it.
    unsigned threads = 1;

    /// min(20 K, 100) random starts for K > 1, 10 for K = 1.
    static int starts_for(int K);
    void validate() const;
};

/// Random start: K seed blocks are drawn k-means++ style on their log peak
/// levels, every other block joins its nearest seed, and each group gets a moment-based logistic guess (a = 1.1 x group max,
/// gamma = 1, c log-uniform on [1, 30], b = e^{c t_half}). Weights are
/// uniform; covariances are the pooled diagonal residual variance times 2.
MixtureModel random_init(std::span<const Block> blocks, int K, std::uint64_t seed, double time_scale = 1.0);

double bic_sample_size(std::span<const Block> blocks, BicSampleSize mode);

/// -2 loglik + (12K - 1) log n.
double bic(double loglik, int K, double n);
double bic(double loglik, int K, std::span<const Block> blocks, BicSampleSize mode = BicSampleSize::total_points);

struct RestartRecord {
    int K = 0;
    int start = 0;
    std::uint64_t seed = 0;
    double loglik = 0.0;
    int iterations = 0;
    Termination termination = Termination::max_iter;
    SpuriousReason reason = SpuriousReason::none;
};

struct OrderResult {
    int K = 0;
    std::optional<FitResult> best;  ///< empty when every start was spurious
    std::optional<double> bic;
    int retained_start = -1;
    int n_spurious = 0;
};

struct SweepResult {
    std::vector<OrderResult> per_k;
    int chosen_K = 0;
    std::vector<RestartRecord> restarts;  ///< ordered by (K, start)

    const OrderResult& chosen() const;
};

/// Runs every seeded start for every K in [k_min, k_max], keeps the best
/// non-spurious fit per K and picks the K with the smallest BIC. Throws
/// AllSpuriousError when no K retains a fit.
SweepResult sweep(std::span<const Block> blocks, const SweepConfig& config, double time_scale = 1.0);

/// EM started from a previous fit, for refreshed data.
FitResult warm_refit(const MixtureModel& previous, std::span<const Block> new_blocks, const EmConfig& config = {});

}  // namespace epimix
