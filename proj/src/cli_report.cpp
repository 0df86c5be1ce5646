#include "epimix/cli_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "csv.hpp"

namespace epimix {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string full(double v) { return fmt("%.17g", v); }
std::string fixed3(double v) { return fmt("%.3f", v); }

std::string_view bic_n_name(BicSampleSize mode) { return mode == BicSampleSize::blocks ? "blocks" : "points"; }

}  // namespace

std::vector<std::size_t> order_by_cases_asymptote(const MixtureModel& model) {
    std::vector<std::size_t> order(model.K());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return model.components[x].curve.cases.a < model.components[y].curve.cases.a;
    });
    return order;
}

FitResult canonicalize(const FitResult& fit) {
    const auto order = order_by_cases_asymptote(fit.model);
    FitResult out = fit;
    out.model.weights.clear();
    out.model.components.clear();
    for (std::size_t k : order) {
        out.model.weights.push_back(fit.model.weights[k]);
        out.model.components.push_back(fit.model.components[k]);
    }
    for (std::size_t b = 0; b < fit.posteriors.blocks(); ++b) {
        for (std::size_t k = 0; k < order.size(); ++k) out.posteriors.at(b, k) = fit.posteriors.at(b, order[k]);
    }
    out.assignments = classify(out.posteriors);
    return out;
}

std::string parameter_table_csv(const MixtureModel& model) {
    std::ostringstream out;
    out << "k,pi,a1,a2,b1,b2,c1,c2,gamma1,gamma2,sigma1,sigma2,rho\n";
    const auto order = order_by_cases_asymptote(model);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& comp = model.components[order[i]];
        const auto& p1 = comp.curve.cases;
        const auto& p2 = comp.curve.deaths;
        out << (i + 1) << ',' << fixed3(model.weights[order[i]]) << ',' << fixed3(p1.a) << ',' << fixed3(p2.a) << ','
            << fixed3(p1.b) << ',' << fixed3(p2.b) << ',' << fixed3(p1.c) << ',' << fixed3(p2.c) << ','
            << fixed3(p1.gamma) << ',' << fixed3(p2.gamma) << ',' << fixed3(comp.sigma.sd_cases()) << ','
            << fixed3(comp.sigma.sd_deaths()) << ',' << fixed3(comp.sigma.rho()) << '\n';
    }
    return out.str();
}

std::string curve_export_csv(const MixtureModel& model, double t_min, double t_max, int points) {
    if (points < 2) throw std::invalid_argument("curve export needs at least two grid points");
    std::ostringstream out;
    out << "k,variable,t_days,value\n";
    const auto order = order_by_cases_asymptote(model);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& curve = model.components[order[i]].curve;
        for (const auto& [name, params] : {std::pair{"cases", curve.cases}, std::pair{"deaths", curve.deaths}}) {
            for (int g = 0; g < points; ++g) {
                const double t = t_min + (t_max - t_min) * g / (points - 1);
                out << (i + 1) << ',' << name << ',' << full(t * model.time_scale) << ','
                    << full(eval_logistic(t, params)) << '\n';
            }
        }
    }
    return out.str();
}

std::string inflection_csv(const MixtureModel& model) {
    std::ostringstream out;
    out << "k,variable,t0_days,y0,asymptote\n";
    const auto order = order_by_cases_asymptote(model);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& curve = model.components[order[i]].curve;
        for (const auto& [name, params] : {std::pair{"cases", curve.cases}, std::pair{"deaths", curve.deaths}}) {
            const auto ip = inflection_point(params);
            out << (i + 1) << ',' << name << ',' << full(ip.t0 * model.time_scale) << ',' << full(ip.y0) << ','
                << full(params.a) << '\n';
        }
    }
    return out.str();
}

std::string assignments_csv(const Posteriors& post) {
    std::ostringstream out;
    out << "region,label";
    for (std::size_t k = 0; k < post.K(); ++k) out << ",posterior_" << (k + 1);
    out << '\n';
    const auto labels = classify(post);
    for (std::size_t b = 0; b < post.blocks(); ++b) {
        out << detail::csv_escape(post.region_ids()[b]) << ',' << (labels[b].label + 1);
        for (double p : post.row(b)) out << ',' << full(p);
        out << '\n';
    }
    return out.str();
}

std::string restart_log_csv(const SweepResult& result) {
    std::ostringstream out;
    out << "K,start,seed,loglik,iterations,termination\n";
    for (const auto& r : result.restarts) {
        out << r.K << ',' << r.start << ',' << r.seed << ',' << full(r.loglik) << ',' << r.iterations << ','
            << to_string(r.termination) << '\n';
    }
    return out.str();
}

nlohmann::ordered_json sweep_report_json(const SweepResult& result, const FitOptions& options) {
    const auto& sc = options.sweep;
    const auto& pc = options.pipeline;
    nlohmann::ordered_json config;
    config["kmin"] = sc.k_min;
    config["kmax"] = sc.k_max;
    config["seed"] = sc.seed;
    config["tol"] = sc.em.tol;
    config["max_iter"] = sc.em.max_iter;
    config["optimizer_max_evals"] = sc.em.optimizer_max_evals;
    config["spurious_min_eigen_ratio"] = sc.em.spurious_min_eigen_ratio;
    config["spurious_min_weight_blocks"] = sc.em.spurious_min_weight_blocks;
    config["bic_n"] = bic_n_name(sc.bic_n);
    config["onset_threshold"] = pc.onset_threshold;
    config["per"] = pc.per;
    if (pc.time_scale) {
        config["time_scale"] = *pc.time_scale;
    } else {
        config["time_scale"] = "auto";
    }
    config["truncate_pre_onset"] = pc.truncate_pre_onset;
    config["monotone"] = pc.monotone == MonotonePolicy::strict ? "strict" : "clamp";

    auto per_k = nlohmann::ordered_json::array();
    for (const auto& r : result.per_k) {
        nlohmann::ordered_json row;
        row["K"] = r.K;
        row["bic"] = r.bic ? nlohmann::ordered_json(*r.bic) : nlohmann::ordered_json(nullptr);
        row["loglik"] = r.best ? nlohmann::ordered_json(r.best->loglik) : nlohmann::ordered_json(nullptr);
        row["retained_start"] = r.best ? nlohmann::ordered_json(r.retained_start) : nlohmann::ordered_json(nullptr);
        row["n_spurious"] = r.n_spurious;
        row["n_starts"] = SweepConfig::starts_for(r.K);
        per_k.push_back(std::move(row));
    }
    nlohmann::ordered_json j;
    j["config"] = std::move(config);
    j["per_K"] = std::move(per_k);
    j["chosen_K"] = result.chosen_K;
    return j;
}

std::string file_sha256(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open input file: " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 15];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
        char h[3];
        std::snprintf(h, sizeof h, "%02x", digest[i]);
        hex += h;
    }
    return hex;
}

int cmd_fit(const FitOptions& options, std::ostream& log) {
    Dataset data;
    try {
        data = load_dataset(options.series, options.population, options.pipeline);
    } catch (const DataError& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }
    for (const auto& w : data.warnings) log << "warning: " << w << '\n';
    if (data.blocks.empty()) {
        log << "error: no region reaches the onset threshold\n";
        return exit_code::input_error;
    }

    FitOptions effective = options;
    auto& sc = effective.sweep;
    if (static_cast<std::size_t>(sc.k_max) > data.blocks.size()) {
        log << "warning: kmax " << sc.k_max << " exceeds the " << data.blocks.size() << " regions; using "
            << data.blocks.size() << '\n';
        sc.k_max = static_cast<int>(data.blocks.size());
        sc.k_min = std::min(sc.k_min, sc.k_max);
    }

    SweepResult result;
    try {
        result = sweep(data.blocks, sc, data.time_scale);
    } catch (const AllSpuriousError& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::all_spurious;
    }
    const auto best = canonicalize(*result.chosen().best);

    std::filesystem::create_directories(options.out_dir);
    const auto& dir = options.out_dir;
    write_json_file(dir / "model.json", model_to_json(best.model));
    write_text_file(dir / "assignments.csv", assignments_csv(best.posteriors));
    write_json_file(dir / "sweep_report.json", sweep_report_json(result, effective));
    write_text_file(dir / "restart_log.csv", restart_log_csv(result));
    write_json_file(dir / "blocks.json", blocks_to_json(data.blocks, data.time_scale));

    nlohmann::ordered_json manifest;
    manifest["tool"] = "epimix";
    manifest["version"] = kToolVersion;
    manifest["inputs"] = {
        {"series", {{"path", options.series.string()}, {"sha256", file_sha256(options.series)}}},
        {"population", {{"path", options.population.string()}, {"sha256", file_sha256(options.population)}}},
    };
    manifest["config"] = sweep_report_json(result, effective)["config"];
    manifest["threads"] = sc.threads;
    manifest["dataset"] = {{"regions", data.blocks.size()},
                           {"excluded", data.excluded},
                           {"total_points", data.total_points()},
                           {"time_scale", data.time_scale}};
    write_json_file(dir / "manifest.json", manifest);

    log << "chosen K = " << result.chosen_K << " (BIC " << full(*result.chosen().bic) << ", loglik "
        << full(best.loglik) << "); artifacts in " << dir.string() << '\n';
    return exit_code::ok;
}

int cmd_classify(const ClassifyOptions& options, std::ostream& out, std::ostream& log) {
    MixtureModel model;
    try {
        model = model_from_json(read_json_file(options.model));
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }
    Dataset data;
    try {
        PipelineConfig pc;
        pc.onset_threshold = options.onset_threshold;
        pc.per = options.per;
        pc.time_scale = model.time_scale;
        data = load_dataset(options.series, options.population, pc);
    } catch (const DataError& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }
    for (const auto& w : data.warnings) log << "warning: " << w << '\n';

    std::ostringstream csv;
    csv << "region,label";
    for (std::size_t k = 0; k < model.K(); ++k) csv << ",posterior_" << (k + 1);
    csv << '\n';
    std::size_t next_block = 0;
    std::vector<std::string> regions;
    for (const auto& b : data.blocks) regions.push_back(b.region_id);
    regions.insert(regions.end(), data.excluded.begin(), data.excluded.end());
    std::sort(regions.begin(), regions.end());
    for (const auto& region : regions) {
        if (next_block < data.blocks.size() && data.blocks[next_block].region_id == region) {
            const auto row = posterior_row(data.blocks[next_block++], model);
            const auto best = std::max_element(row.tau.begin(), row.tau.end()) - row.tau.begin();
            csv << detail::csv_escape(region) << ',' << (best + 1);
            for (double p : row.tau) csv << ',' << full(p);
        } else {
            log << "warning: region '" << region << "' is unassignable (never reaches the onset threshold)\n";
            csv << detail::csv_escape(region) << ",NA";
            for (std::size_t k = 0; k < model.K(); ++k) csv << ',';
        }
        csv << '\n';
    }

    if (options.out) {
        write_text_file(*options.out, csv.str());
    } else {
        out << csv.str();
    }
    return exit_code::ok;
}

int cmd_report(const ReportOptions& options, std::ostream& out, std::ostream& log) {
    MixtureModel model;
    BlockFile blocks;
    try {
        const auto j = read_json_file(options.model);
        // weights rounded to three decimals need not sum to one
        const double tol = 5e-4 * static_cast<double>(j.at("components").size());
        model = model_from_json(j, tol);
        blocks = blocks_from_json(read_json_file(options.blocks));
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return exit_code::input_error;
    }
    if (blocks.blocks.empty()) {
        log << "error: block file has no blocks\n";
        return exit_code::input_error;
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks.blocks) {
        lo = std::min(lo, b.times.front() * blocks.time_scale);
        hi = std::max(hi, b.times.back() * blocks.time_scale);
    }
    if (!(hi > lo)) hi = lo + 1.0;

    const auto table = parameter_table_csv(model);
    std::filesystem::create_directories(options.out_dir);
    write_text_file(options.out_dir / "parameters.csv", table);
    write_text_file(options.out_dir / "curves.csv",
                    curve_export_csv(model, lo / model.time_scale, hi / model.time_scale, options.grid_points));
    write_text_file(options.out_dir / "inflection.csv", inflection_csv(model));
    out << table;
    return exit_code::ok;
}

}  // namespace epimix
