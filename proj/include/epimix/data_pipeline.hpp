#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace epimix {

/// Raised for malformed or inconsistent input data. The message names the
/// offending region, file and line where they are known.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Daily cumulative counts for one region.
struct RegionSeries {
    std::string region_id;
    std::vector<std::chrono::sys_days> dates;
    std::vector<std::int64_t> cases;
    std::vector<std::int64_t> deaths;
    std::int64_t population = 0;
};

/// One (cases, deaths) observation, in counts per `per` population.
struct Observation {
    double cases = 0.0;
    double deaths = 0.0;
    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Aligned, population-adjusted series of one region. All observations of a
/// block share one cluster label.
struct Block {
    std::string region_id;
    std::vector<double> times;
    std::vector<Observation> obs;

    std::size_t size() const { return obs.size(); }
    /// Lengths equal and nonzero, times finite and strictly increasing.
    void validate() const;

    friend bool operator==(const Block&, const Block&) = default;
};

enum class MonotonePolicy {
    clamp,   ///< replace each value by the running maximum
    strict,  ///< reject the region
};

struct PipelineConfig {
    double onset_threshold = 1.0;
    double per = 100000.0;
    /// Divides aligned day offsets. Unset means "auto": the largest aligned
    /// day offset across retained regions.
    std::optional<double> time_scale;
    bool truncate_pre_onset = true;
    MonotonePolicy monotone = MonotonePolicy::clamp;
};

/// Checks the RegionSeries invariants: equal nonzero lengths, consecutive
/// daily dates, nonnegative counts, positive population. Returns the number of
/// values repaired under MonotonePolicy::clamp (zero under strict, which
/// throws instead).
std::size_t check_series(RegionSeries& series, MonotonePolicy policy);

/// count / population * per, elementwise.
std::vector<Observation> adjust_population(const RegionSeries& series, double per = 100000.0);

/// First index whose case rate reaches `threshold`.
std::optional<std::size_t> compute_onset(std::span<const double> rates_cases, double threshold = 1.0);

/// Builds the aligned block, or nothing when the region never reaches the
/// onset threshold. Times are (date - onset date) in days divided by time_scale.
std::optional<Block> align_and_build(const RegionSeries& series, double threshold, double per, double time_scale,
                                     bool truncate_pre_onset);

/// Day offset of the last observation relative to onset, or nothing when
/// the onset is never reached.
std::optional<double> aligned_span_days(const RegionSeries& series, double threshold, double per);

std::vector<RegionSeries> read_series_csv(const std::filesystem::path& path);
std::vector<std::pair<std::string, std::int64_t>> read_population_csv(const std::filesystem::path& path);

struct Dataset {
    std::vector<Block> blocks;  ///< ordered by region_id
    double time_scale = 1.0;
    std::vector<std::string> excluded;  ///< regions that never reached onset
    std::vector<std::string> warnings;

    std::size_t total_points() const;
};

/// Joins series and populations and returns one block per region that
/// reaches onset. Throws DataError on any ingestion problem.
Dataset build_dataset(std::vector<RegionSeries> series,
                      const std::vector<std::pair<std::string, std::int64_t>>& populations,
                      const PipelineConfig& config);

Dataset load_dataset(const std::filesystem::path& series_path, const std::filesystem::path& population_path,
                     const PipelineConfig& config);

/// Parses YYYY-MM-DD; throws DataError otherwise.
std::chrono::sys_days parse_iso_date(std::string_view text);
std::string format_iso_date(std::chrono::sys_days day);

}  // namespace epimix
