// epimix: semi-supervised clustering of regional epidemic curves.

#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "epimix/cli_report.hpp"

namespace {

// "auto" or a positive number.
std::optional<double> parse_time_scale(const std::string& text) {
    if (text == "auto") return std::nullopt;
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !(v > 0.0)) throw CLI::ValidationError("--time-scale", "expected 'auto' or a positive number");
    return v;
}

unsigned parse_threads(const std::string& text) {
    if (text == "auto") return std::max(1u, std::thread::hardware_concurrency());
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size() || v < 1) throw CLI::ValidationError("--threads", "expected 'auto' or a positive integer");
    return static_cast<unsigned>(v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised mixture clustering of regional epidemic curves"};
    app.set_version_flag("--version", epimix::kToolVersion);
    app.require_subcommand(1);

    epimix::FitOptions fit;
    std::string time_scale = "auto";
    std::string threads = "auto";
    std::string bic_n = "points";
    bool keep_pre_onset = false;
    bool strict_monotone = false;
    auto* fit_cmd = app.add_subcommand("fit", "Sweep mixture orders and fit the BIC-best model");
    fit_cmd->add_option("--series", fit.series, "Series CSV (region,date,cases,deaths)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--population", fit.population, "Population CSV (region,population)")->required();
    fit_cmd->add_option("--kmin", fit.sweep.k_min, "Smallest mixture order")->capture_default_str();
    fit_cmd->add_option("--kmax", fit.sweep.k_max, "Largest mixture order")->capture_default_str();
    fit_cmd->add_option("--seed", fit.sweep.seed, "Master seed for the random starts")->capture_default_str();
    fit_cmd->add_option("--tol", fit.sweep.em.tol, "Relative log-likelihood tolerance")->capture_default_str();
    fit_cmd->add_option("--max-iter", fit.sweep.em.max_iter, "EM iteration cap")->capture_default_str();
    fit_cmd->add_option("--onset-threshold", fit.pipeline.onset_threshold, "Onset rate per --per population")
        ->capture_default_str();
    fit_cmd->add_option("--per", fit.pipeline.per, "Population unit of the rates")->capture_default_str();
    fit_cmd->add_option("--time-scale", time_scale, "Days per unit of model time, or auto")->capture_default_str();
    fit_cmd->add_option("--bic-n", bic_n, "BIC sample size")->check(CLI::IsMember({"points", "blocks"}))->capture_default_str();
    fit_cmd->add_option("--out", fit.out_dir, "Output directory")->capture_default_str();
    fit_cmd->add_option("--threads", threads, "Worker threads, or auto")->capture_default_str();
    fit_cmd->add_flag("--keep-pre-onset", keep_pre_onset, "Keep observations before onset (negative times)");
    fit_cmd->add_flag("--strict-monotone", strict_monotone, "Reject decreasing cumulative counts instead of clamping");

    epimix::ClassifyOptions cls;
    std::string cls_out;
    auto* cls_cmd = app.add_subcommand("classify", "Assign regions to the components of a fitted model");
    cls_cmd->add_option("--model", cls.model, "Model JSON")->required();
    cls_cmd->add_option("--series", cls.series, "Series CSV")->required();
    cls_cmd->add_option("--population", cls.population, "Population CSV")->required();
    cls_cmd->add_option("--onset-threshold", cls.onset_threshold, "Onset rate")->capture_default_str();
    cls_cmd->add_option("--per", cls.per, "Population unit of the rates")->capture_default_str();
    cls_cmd->add_option("--out", cls_out, "Assignments CSV (default: stdout)");

    epimix::ReportOptions rep;
    auto* rep_cmd = app.add_subcommand("report", "Parameter table, curve samples and inflection points");
    rep_cmd->add_option("--model", rep.model, "Model JSON")->required();
    rep_cmd->add_option("--blocks", rep.blocks, "Block JSON written by fit")->required();
    rep_cmd->add_option("--out", rep.out_dir, "Output directory")->capture_default_str();
    rep_cmd->add_option("--grid", rep.grid_points, "Curve grid points")->capture_default_str();

    try {
        app.parse(argc, argv);
        if (*fit_cmd) {
            fit.pipeline.time_scale = parse_time_scale(time_scale);
            fit.sweep.threads = parse_threads(threads);
            fit.sweep.bic_n = bic_n == "blocks" ? epimix::BicSampleSize::blocks : epimix::BicSampleSize::total_points;
            fit.pipeline.truncate_pre_onset = !keep_pre_onset;
            fit.pipeline.monotone = strict_monotone ? epimix::MonotonePolicy::strict : epimix::MonotonePolicy::clamp;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return epimix::exit_code::failure;
    }

    try {
        if (*fit_cmd) return epimix::cmd_fit(fit, std::cerr);
        if (*cls_cmd) {
            if (!cls_out.empty()) cls.out = cls_out;
            return epimix::cmd_classify(cls, std::cout, std::cerr);
        }
        return epimix::cmd_report(rep, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return epimix::exit_code::failure;
    }
}
