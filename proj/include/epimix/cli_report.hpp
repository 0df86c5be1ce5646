#pragma once

// End-to-end commands behind the `epimix` executable, and the report writers
// they share. Commands return the process exit status.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "epimix/data_pipeline.hpp"
#include "epimix/model_selection.hpp"
#include "epimix/serialization.hpp"

namespace epimix {

inline constexpr const char* kToolVersion = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;       ///< unexpected error or invalid option
inline constexpr int input_error = 2;   ///< unreadable or inconsistent input data
inline constexpr int all_spurious = 3;  ///< no mixture order retained a fit
}  // namespace exit_code

struct FitOptions {
    std::filesystem::path series;
    std::filesystem::path population;
    std::filesystem::path out_dir = "epimix-out";
    PipelineConfig pipeline;
    SweepConfig sweep;
};

struct ClassifyOptions {
    std::filesystem::path model;
    std::filesystem::path series;
    std::filesystem::path population;
    double onset_threshold = 1.0;
    double per = 100000.0;
    std::optional<std::filesystem::path> out;  ///< stdout when unset
};

struct ReportOptions {
    std::filesystem::path model;
    std::filesystem::path blocks;
    std::filesystem::path out_dir = "epimix-report";
    int grid_points = 200;
};

/// Writes model.json, assignments.csv, sweep_report.json, restart_log.csv,
/// manifest.json and blocks.json into out_dir.
int cmd_fit(const FitOptions& options, std::ostream& log);

/// Assigns each region of the series to a component of a frozen model.
int cmd_classify(const ClassifyOptions& options, std::ostream& out, std::ostream& log);

/// Writes parameters.csv, curves.csv and inflection.csv into out_dir.
int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& log);

/// Component order by ascending cases asymptote (ties by index).
std::vector<std::size_t> order_by_cases_asymptote(const MixtureModel& model);

/// Reorders components (and posterior columns / labels) so that the cases
/// asymptote ascends.
FitResult canonicalize(const FitResult& fit);

/// `k,pi,a1,a2,b1,b2,c1,c2,gamma1,gamma2,sigma1,sigma2,rho`, three decimals,
/// components ordered by ascending a1 and numbered from 1.
std::string parameter_table_csv(const MixtureModel& model);

/// `k,variable,t_days,value` on `points` equally spaced scaled times in
/// [t_min, t_max], reported in days.
std::string curve_export_csv(const MixtureModel& model, double t_min, double t_max, int points = 200);

/// `k,variable,t0_days,y0,asymptote` per component and response.
std::string inflection_csv(const MixtureModel& model);

/// `region,label,posterior_1,...,posterior_K`, labels numbered from 1.
std::string assignments_csv(const Posteriors& post);

/// `K,start,seed,loglik,iterations,termination`.
std::string restart_log_csv(const SweepResult& result);

nlohmann::ordered_json sweep_report_json(const SweepResult& result, const FitOptions& options);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

}  // namespace epimix
