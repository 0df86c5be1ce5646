#include <doctest.h>

#include <string>

#include "epimix/data_pipeline.hpp"
#include "epimix/serialization.hpp"
#include "tempdir.hpp"

using namespace epimix;
using epimix::testing::TempDir;

namespace {

RegionSeries make_series(std::string id, std::string first_date, std::vector<std::int64_t> cases,
                         std::vector<std::int64_t> deaths, std::int64_t population) {
    RegionSeries s;
    s.region_id = std::move(id);
    const auto d0 = parse_iso_date(first_date);
    for (std::size_t i = 0; i < cases.size(); ++i) s.dates.push_back(d0 + std::chrono::days(i));
    s.cases = std::move(cases);
    s.deaths = std::move(deaths);
    s.population = population;
    return s;
}

bool contains(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

template <class F>
std::string error_of(F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("adjust_population") {
    CHECK(adjust_population(make_series("x", "2020-03-01", {50}, {0}, 5'000'000))[0].cases == 1.0);
    CHECK(adjust_population(make_series("x", "2020-03-01", {0}, {0}, 123))[0].cases == 0.0);
    const auto r = adjust_population(make_series("x", "2020-03-01", {10, 20}, {1, 3}, 1'000'000));
    REQUIRE(r.size() == 2);
    CHECK(r[0].cases == 1.0);
    CHECK(r[1].cases == 2.0);
    CHECK(r[1].deaths == doctest::Approx(0.3).epsilon(1e-15));
    const auto msg = error_of([] { adjust_population(make_series("Atlantis", "2020-03-01", {1}, {0}, 0)); });
    CHECK(contains(msg, "Atlantis"));
}

TEST_CASE("compute_onset") {
    const std::vector<double> a{0.5, 0.9, 1.2, 3.0};
    CHECK(compute_onset(a, 1.0) == 2u);
    const std::vector<double> b{2.0, 3.0};
    CHECK(compute_onset(b, 1.0) == 0u);
    const std::vector<double> c{0.1, 0.2};
    CHECK_FALSE(compute_onset(c, 1.0).has_value());
    const std::vector<double> exact{0.0, 1.0};
    CHECK(compute_onset(exact, 1.0) == 1u);
    CHECK_THROWS(compute_onset(std::vector<double>{}, 1.0));
}

TEST_CASE("align_and_build") {
    // threshold crossed on the third day (per 100k with population 100k => raw counts)
    const auto s = make_series("r", "2020-03-01", {0, 0, 1, 2, 5}, {0, 0, 0, 0, 1}, 100'000);
    const auto block = align_and_build(s, 1.0, 100000.0, 1.0, true);
    REQUIRE(block);
    CHECK(block->size() == 3);
    CHECK(block->times == std::vector<double>{0.0, 1.0, 2.0});
    CHECK(block->obs[0].cases >= 1.0);
    CHECK(block->obs[2] == Observation{5.0, 1.0});

    const auto kept = align_and_build(s, 1.0, 100000.0, 2.0, false);
    REQUIRE(kept);
    CHECK(kept->times == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});

    const auto never = make_series("n", "2020-03-01", {0, 0, 0}, {0, 0, 0}, 100'000);
    CHECK_FALSE(align_and_build(never, 1.0, 100000.0, 1.0, true).has_value());
    CHECK(aligned_span_days(s, 1.0, 100000.0) == 2.0);
}

TEST_CASE("check_series") {
    auto s = make_series("r", "2020-03-01", {1, 3, 2, 4}, {0, 1, 1, 0}, 10);
    auto strict = s;
    CHECK_THROWS_AS(check_series(strict, MonotonePolicy::strict), DataError);
    CHECK(check_series(s, MonotonePolicy::clamp) == 2);
    CHECK(s.cases == std::vector<std::int64_t>{1, 3, 3, 4});
    CHECK(s.deaths == std::vector<std::int64_t>{0, 1, 1, 1});

    auto gap = make_series("g", "2020-03-01", {1, 2}, {0, 0}, 10);
    gap.dates[1] += std::chrono::days(1);
    CHECK(contains(error_of([&] { check_series(gap, MonotonePolicy::clamp); }), "consecutive"));
}

TEST_CASE("ISO dates") {
    CHECK(format_iso_date(parse_iso_date("2020-02-29")) == "2020-02-29");
    CHECK_THROWS_AS(parse_iso_date("2021-02-29"), DataError);
    CHECK_THROWS_AS(parse_iso_date("03/01/2020"), DataError);
    CHECK_THROWS_AS(parse_iso_date("2020-3-1"), DataError);
}

TEST_CASE("load_dataset") {
    TempDir dir;
    const auto series = dir.write("series.csv",
                                  "region,date,cases,deaths\n"
                                  "beta,2020-03-01,5,0\n"
                                  "beta,2020-03-02,9,1\n"
                                  "alpha,2020-03-01,0,0\n"
                                  "alpha,2020-03-02,2,0\n"
                                  "alpha,2020-03-03,4,1\n"
                                  "alpha,2020-03-04,8,1\n");
    const auto pop = dir.write("population.csv", "region,population\nalpha,100000\nbeta,200000\n");

    SUBCASE("two regions") {
        const auto ds = load_dataset(series, pop, {});
        REQUIRE(ds.blocks.size() == 2);
        CHECK(ds.blocks[0].region_id == "alpha");
        CHECK(ds.blocks[1].region_id == "beta");
        CHECK(ds.time_scale == 2.0);
        CHECK(ds.blocks[0].times == std::vector<double>{0.0, 0.5, 1.0});
        CHECK(ds.blocks[1].obs[0].cases == 2.5);
        // retained rows after truncation: alpha 3 of 4, beta 2 of 2
        CHECK(ds.total_points() == 5);
        for (const auto& b : ds.blocks) {
            CHECK(b.obs[0].cases >= 1.0);
            for (const auto& o : b.obs) CHECK(o.deaths >= 0.0);
        }
    }
    SUBCASE("fixed time scale") {
        PipelineConfig cfg;
        cfg.time_scale = 1.0;
        CHECK(load_dataset(series, pop, cfg).blocks[0].times == std::vector<double>{0.0, 1.0, 2.0});
    }
    SUBCASE("missing population names every region") {
        const auto partial = dir.write("partial.csv", "region,population\nzeta,5\n");
        const auto msg = error_of([&] { load_dataset(series, partial, {}); });
        CHECK(contains(msg, "alpha"));
        CHECK(contains(msg, "beta"));
    }
    SUBCASE("missing file names the path") {
        const auto msg = error_of([&] { load_dataset(series, dir.path() / "nope.csv", {}); });
        CHECK(contains(msg, "nope.csv"));
    }
    SUBCASE("duplicate rows report both lines") {
        const auto dup = dir.write("dup.csv",
                                   "region,date,cases,deaths\n"
                                   "alpha,2020-03-01,1,0\n"
                                   "alpha,2020-03-02,2,0\n"
                                   "alpha,2020-03-01,1,0\n");
        const auto msg = error_of([&] { read_series_csv(dup); });
        CHECK(contains(msg, "lines 2 and 4"));
    }
    SUBCASE("malformed row reports its line") {
        const auto bad = dir.write("bad.csv", "region,date,cases,deaths\nalpha,2020-03-01,1,0\nalpha,2020-03-02,x,0\n");
        CHECK(contains(error_of([&] { read_series_csv(bad); }), ":3"));
        const auto hdr = dir.write("hdr.csv", "id,date,cases,deaths\n");
        CHECK_THROWS_AS(read_series_csv(hdr), DataError);
        const auto empty = dir.write("empty.csv", "");
        CHECK_THROWS_AS(read_series_csv(empty), DataError);
    }
    SUBCASE("region below threshold is excluded") {
        const auto big = dir.write("big.csv", "region,population\nalpha,100000\nbeta,100000000\n");
        const auto ds = load_dataset(series, big, {});
        REQUIRE(ds.blocks.size() == 1);
        CHECK(ds.excluded == std::vector<std::string>{"beta"});
    }
    SUBCASE("population errors") {
        const auto zero = dir.write("zero.csv", "region,population\nalpha,0\nbeta,1\n");
        CHECK_THROWS_AS(read_population_csv(zero), DataError);
        const auto twice = dir.write("twice.csv", "region,population\nalpha,1\nalpha,1\n");
        CHECK_THROWS_AS(read_population_csv(twice), DataError);
    }
}

TEST_CASE("block export round trip is bit exact") {
    const auto s = make_series("r", "2020-03-01", {0, 3, 7, 11, 13}, {0, 0, 1, 1, 2}, 3'000'001);
    const auto block = align_and_build(s, 1e-5, 100000.0, 7.0, true);
    REQUIRE(block);
    const std::vector<Block> blocks{*block};
    const auto text = blocks_to_json(blocks, 7.0).dump();
    const auto back = blocks_from_json(nlohmann::json::parse(text));
    CHECK(back.time_scale == 7.0);
    REQUIRE(back.blocks.size() == 1);
    CHECK(back.blocks[0] == *block);
}

TEST_CASE("Block::validate") {
    Block b{"x", {0.0, 1.0}, {{1.0, 0.0}, {2.0, 0.0}}};
    CHECK_NOTHROW(b.validate());
    b.times[1] = 0.0;
    CHECK_THROWS(b.validate());
    b.times.pop_back();
    CHECK_THROWS(b.validate());
}
