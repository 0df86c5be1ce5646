#include "epimix/serialization.hpp"

#include <fstream>
#include <stdexcept>

namespace epimix {

namespace {

nlohmann::ordered_json logistic_to_json(const LogisticParams& p) {
    return {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"gamma", p.gamma}};
}

LogisticParams logistic_from_json(const nlohmann::json& j) {
    return {j.at("a").get<double>(), j.at("b").get<double>(), j.at("c").get<double>(), j.at("gamma").get<double>()};
}

}  // namespace

nlohmann::ordered_json model_to_json(const MixtureModel& model) {
    nlohmann::ordered_json j;
    j["K"] = model.K();
    j["time_scale"] = model.time_scale;
    j["weights"] = model.weights;
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : model.components) {
        comps.push_back({{"cases", logistic_to_json(c.curve.cases)},
                         {"deaths", logistic_to_json(c.curve.deaths)},
                         {"sigma", {{"s1", c.sigma.sd_cases()}, {"s2", c.sigma.sd_deaths()}, {"rho", c.sigma.rho()}}}});
    }
    j["components"] = std::move(comps);
    return j;
}

MixtureModel model_from_json(const nlohmann::json& j, double weight_sum_tol) {
    MixtureModel model;
    try {
        model.time_scale = j.at("time_scale").get<double>();
        model.weights = j.at("weights").get<std::vector<double>>();
        for (const auto& c : j.at("components")) {
            const auto& s = c.at("sigma");
            model.components.push_back({{logistic_from_json(c.at("cases")), logistic_from_json(c.at("deaths"))},
                                        Covariance2(s.at("s1").get<double>(), s.at("s2").get<double>(),
                                                    s.at("rho").get<double>())});
        }
        if (j.at("K").get<std::size_t>() != model.K()) {
            throw std::invalid_argument("K does not match the number of components");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed model JSON: ") + e.what());
    }
    model.validate(weight_sum_tol);
    return model;
}

nlohmann::ordered_json blocks_to_json(std::span<const Block> blocks, double time_scale) {
    nlohmann::ordered_json j;
    j["time_scale"] = time_scale;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& b : blocks) {
        std::vector<double> cases;
        std::vector<double> deaths;
        for (const auto& o : b.obs) {
            cases.push_back(o.cases);
            deaths.push_back(o.deaths);
        }
        arr.push_back({{"region", b.region_id}, {"times", b.times}, {"cases", cases}, {"deaths", deaths}});
    }
    j["blocks"] = std::move(arr);
    return j;
}

BlockFile blocks_from_json(const nlohmann::json& j) {
    BlockFile out;
    try {
        out.time_scale = j.at("time_scale").get<double>();
        for (const auto& jb : j.at("blocks")) {
            Block b;
            b.region_id = jb.at("region").get<std::string>();
            b.times = jb.at("times").get<std::vector<double>>();
            const auto cases = jb.at("cases").get<std::vector<double>>();
            const auto deaths = jb.at("deaths").get<std::vector<double>>();
            if (cases.size() != b.times.size() || deaths.size() != b.times.size()) {
                throw std::invalid_argument("block '" + b.region_id + "' has mismatched array lengths");
            }
            for (std::size_t i = 0; i < cases.size(); ++i) b.obs.push_back({cases[i], deaths[i]});
            b.validate();
            out.blocks.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed block JSON: ") + e.what());
    }
    if (!(out.time_scale > 0.0)) throw std::invalid_argument("block JSON time_scale must be positive");
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

}  // namespace epimix
