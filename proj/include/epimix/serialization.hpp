#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "epimix/data_pipeline.hpp"
#include "epimix/mixture_core.hpp"

namespace epimix {

/// {K, time_scale, weights[], components[{cases:{a,b,c,gamma}, deaths:{...}, sigma:{s1,s2,rho}}]}.
/// Doubles are written in shortest round-trip form, so reading back is exact.
nlohmann::ordered_json model_to_json(const MixtureModel& model);

/// Validates the model; `weight_sum_tol` loosens the weight-sum check for
/// tables whose weights were rounded to print precision.
MixtureModel model_from_json(const nlohmann::json& j, double weight_sum_tol = 1e-12);

/// {time_scale, blocks:[{region, times[], cases[], deaths[]}]}.
nlohmann::ordered_json blocks_to_json(std::span<const Block> blocks, double time_scale);

struct BlockFile {
    std::vector<Block> blocks;
    double time_scale = 1.0;
};
BlockFile blocks_from_json(const nlohmann::json& j);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace epimix
