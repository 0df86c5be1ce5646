#include "epimix/data_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "csv.hpp"

namespace epimix {

namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string location(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input file: " + path.string());
    return in;
}

}  // namespace

std::chrono::sys_days parse_iso_date(std::string_view text) {
    using namespace std::chrono;
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_number(text.substr(0, 4), y) ||
        !parse_number(text.substr(5, 2), m) || !parse_number(text.substr(8, 2), d)) {
        throw DataError("invalid ISO-8601 date '" + std::string(text) + "'");
    }
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
    return sys_days{ymd};
}

std::string format_iso_date(std::chrono::sys_days day) {
    const std::chrono::year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

void Block::validate() const {
    if (obs.empty()) throw std::invalid_argument("block '" + region_id + "' is empty");
    if (times.size() != obs.size()) {
        throw std::invalid_argument("block '" + region_id + "' has mismatched times and observations");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(obs[i].cases) || !std::isfinite(obs[i].deaths)) {
            throw std::invalid_argument("block '" + region_id + "' contains non-finite values");
        }
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw std::invalid_argument("block '" + region_id + "' times are not strictly increasing");
        }
    }
}

std::size_t check_series(RegionSeries& s, MonotonePolicy policy) {
    const std::size_t n = s.dates.size();
    if (n == 0) throw DataError("region '" + s.region_id + "' has no observations");
    if (s.cases.size() != n || s.deaths.size() != n) {
        throw DataError("region '" + s.region_id + "' has mismatched column lengths");
    }
    if (s.population <= 0) throw DataError("region '" + s.region_id + "' has nonpositive population");
    for (std::size_t i = 1; i < n; ++i) {
        const auto step = (s.dates[i] - s.dates[i - 1]).count();
        if (step != 1) {
            throw DataError("region '" + s.region_id + "' is not a consecutive daily series between " +
                            format_iso_date(s.dates[i - 1]) + " and " + format_iso_date(s.dates[i]));
        }
    }
    std::size_t repaired = 0;
    auto repair = [&](std::vector<std::int64_t>& v, const char* what) {
        for (std::size_t i = 0; i < n; ++i) {
            if (v[i] < 0) throw DataError("region '" + s.region_id + "' has negative " + what + " count");
            if (i > 0 && v[i] < v[i - 1]) {
                if (policy == MonotonePolicy::strict) {
                    throw DataError("region '" + s.region_id + "' cumulative " + what + " decrease on " +
                                    format_iso_date(s.dates[i]));
                }
                v[i] = v[i - 1];
                ++repaired;
            }
        }
    };
    repair(s.cases, "cases");
    repair(s.deaths, "deaths");
    return repaired;
}

std::vector<Observation> adjust_population(const RegionSeries& series, double per) {
    if (series.population <= 0) {
        throw DataError("region '" + series.region_id + "' has nonpositive population");
    }
    if (!(per > 0.0)) throw std::invalid_argument("population scaling must be positive");
    const auto pop = static_cast<double>(series.population);
    std::vector<Observation> out(series.cases.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = {static_cast<double>(series.cases[i]) / pop * per, static_cast<double>(series.deaths[i]) / pop * per};
    }
    return out;
}

std::optional<std::size_t> compute_onset(std::span<const double> rates_cases, double threshold) {
    if (rates_cases.empty()) throw std::invalid_argument("onset of an empty sequence");
    if (!(threshold > 0.0)) throw std::invalid_argument("onset threshold must be positive");
    for (std::size_t i = 0; i < rates_cases.size(); ++i) {
        if (rates_cases[i] >= threshold) return i;
    }
    return std::nullopt;
}

namespace {

std::optional<std::size_t> onset_of(const std::vector<Observation>& rates, double threshold) {
    std::vector<double> cases(rates.size());
    std::transform(rates.begin(), rates.end(), cases.begin(), [](const Observation& o) { return o.cases; });
    return compute_onset(cases, threshold);
}

}  // namespace

std::optional<double> aligned_span_days(const RegionSeries& series, double threshold, double per) {
    const auto rates = adjust_population(series, per);
    const auto onset = onset_of(rates, threshold);
    if (!onset) return std::nullopt;
    return static_cast<double>((series.dates.back() - series.dates[*onset]).count());
}

std::optional<Block> align_and_build(const RegionSeries& series, double threshold, double per, double time_scale,
                                     bool truncate_pre_onset) {
    if (!(time_scale > 0.0)) throw std::invalid_argument("time scale must be positive");
    const auto rates = adjust_population(series, per);
    const auto onset = onset_of(rates, threshold);
    if (!onset) return std::nullopt;

    Block block;
    block.region_id = series.region_id;
    const std::size_t first = truncate_pre_onset ? *onset : 0;
    const auto origin = series.dates[*onset];
    for (std::size_t i = first; i < rates.size(); ++i) {
        block.times.push_back(static_cast<double>((series.dates[i] - origin).count()) / time_scale);
        block.obs.push_back(rates[i]);
    }
    return block;
}

std::vector<RegionSeries> read_series_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("series file is empty: " + path.string());
    if (detail::strip_bom(line) != "region,date,cases,deaths") {
        throw DataError(location(path, 1) + ": expected header 'region,date,cases,deaths'");
    }

    struct Row {
        std::chrono::sys_days date;
        std::int64_t cases;
        std::int64_t deaths;
        std::size_t line;
    };
    std::map<std::string, std::vector<Row>> by_region;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::strip_bom(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 4) {
            throw DataError(location(path, line_no) + ": expected 4 fields, found " + std::to_string(fields.size()));
        }
        if (fields[0].empty()) throw DataError(location(path, line_no) + ": empty region");
        Row row{};
        try {
            row.date = parse_iso_date(fields[1]);
        } catch (const DataError& e) {
            throw DataError(location(path, line_no) + ": " + e.what());
        }
        if (!parse_number(fields[2], row.cases) || !parse_number(fields[3], row.deaths)) {
            throw DataError(location(path, line_no) + ": counts must be integers");
        }
        if (row.cases < 0 || row.deaths < 0) throw DataError(location(path, line_no) + ": negative count");
        row.line = line_no;
        by_region[fields[0]].push_back(row);
    }
    if (by_region.empty()) throw DataError("series file has no data rows: " + path.string());

    std::vector<RegionSeries> out;
    std::ostringstream duplicates;
    for (auto& [region, rows] : by_region) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
        RegionSeries s;
        s.region_id = region;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].date == rows[i - 1].date) {
                duplicates << "\n  " << region << " " << format_iso_date(rows[i].date) << " at lines "
                           << rows[i - 1].line << " and " << rows[i].line;
                continue;
            }
            s.dates.push_back(rows[i].date);
            s.cases.push_back(rows[i].cases);
            s.deaths.push_back(rows[i].deaths);
        }
        out.push_back(std::move(s));
    }
    if (!duplicates.str().empty()) {
        throw DataError(path.string() + ": duplicate (region, date) rows:" + duplicates.str());
    }
    return out;
}

std::vector<std::pair<std::string, std::int64_t>> read_population_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("population file is empty: " + path.string());
    if (detail::strip_bom(line) != "region,population") {
        throw DataError(location(path, 1) + ": expected header 'region,population'");
    }
    std::vector<std::pair<std::string, std::int64_t>> out;
    std::map<std::string, std::size_t> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::strip_bom(line).empty()) continue;
        const auto fields = detail::split_csv_line(line);
        std::int64_t pop = 0;
        if (fields.size() != 2 || fields[0].empty() || !parse_number(fields[1], pop)) {
            throw DataError(location(path, line_no) + ": expected 'region,population' with an integer population");
        }
        if (pop <= 0) {
            throw DataError(location(path, line_no) + ": region '" + fields[0] + "' has nonpositive population");
        }
        if (auto it = seen.find(fields[0]); it != seen.end()) {
            throw DataError(path.string() + ": duplicate population for region '" + fields[0] + "' at lines " +
                            std::to_string(it->second) + " and " + std::to_string(line_no));
        }
        seen.emplace(fields[0], line_no);
        out.emplace_back(fields[0], pop);
    }
    return out;
}

std::size_t Dataset::total_points() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
}

Dataset build_dataset(std::vector<RegionSeries> series,
                      const std::vector<std::pair<std::string, std::int64_t>>& populations,
                      const PipelineConfig& config) {
    if (!(config.onset_threshold > 0.0)) throw std::invalid_argument("onset threshold must be positive");
    if (!(config.per > 0.0)) throw std::invalid_argument("population scaling must be positive");
    if (config.time_scale && !(*config.time_scale > 0.0)) throw std::invalid_argument("time scale must be positive");

    const std::map<std::string, std::int64_t> pop(populations.begin(), populations.end());
    std::vector<std::string> missing;
    for (auto& s : series) {
        if (auto it = pop.find(s.region_id); it != pop.end()) {
            s.population = it->second;
        } else {
            missing.push_back(s.region_id);
        }
    }
    if (!missing.empty()) {
        std::string msg = "regions without a population record:";
        for (const auto& m : missing) msg += " " + m;
        throw DataError(msg);
    }

    std::sort(series.begin(), series.end(),
              [](const RegionSeries& a, const RegionSeries& b) { return a.region_id < b.region_id; });

    Dataset out;
    double max_span = 0.0;
    for (auto& s : series) {
        if (const auto repaired = check_series(s, config.monotone); repaired > 0) {
            out.warnings.push_back("region '" + s.region_id + "': clamped " + std::to_string(repaired) +
                                   " non-cumulative values to the running maximum");
        }
        if (const auto span = aligned_span_days(s, config.onset_threshold, config.per)) {
            max_span = std::max(max_span, *span);
        }
    }
    out.time_scale = config.time_scale.value_or(max_span > 0.0 ? max_span : 1.0);

    for (const auto& s : series) {
        auto block = align_and_build(s, config.onset_threshold, config.per, out.time_scale, config.truncate_pre_onset);
        if (block) {
            out.blocks.push_back(std::move(*block));
        } else {
            out.excluded.push_back(s.region_id);
            out.warnings.push_back("region '" + s.region_id + "' never reaches the onset threshold; excluded");
        }
    }
    return out;
}

Dataset load_dataset(const std::filesystem::path& series_path, const std::filesystem::path& population_path,
                     const PipelineConfig& config) {
    auto series = read_series_csv(series_path);
    const auto populations = read_population_csv(population_path);
    return build_dataset(std::move(series), populations, config);
}

}  // namespace epimix
