#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "epimix/mixture_core.hpp"
#include "epimix/random.hpp"
#include "synthetic.hpp"

using namespace epimix;

namespace {

double dense_log_density(Observation y, std::pair<double, double> mu, const Covariance2& s) {
    Eigen::Matrix2d m;
    m << s.var_cases(), s.cov(), s.cov(), s.var_deaths();
    const Eigen::Vector2d r(y.cases - mu.first, y.deaths - mu.second);
    return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(m.determinant()) - 0.5 * r.dot(m.inverse() * r);
}

double density(Observation y, std::pair<double, double> mu, const Covariance2& s) {
    return std::exp(dense_log_density(y, mu, s));
}

Covariance2 random_sigma(Rng& rng) {
    return {0.2 + 3.0 * uniform01(rng), 0.2 + 3.0 * uniform01(rng), -0.95 + 1.9 * uniform01(rng)};
}

MixtureModel small_model(Rng& rng, std::size_t K) {
    MixtureModel m;
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        m.weights.push_back(0.1 + uniform01(rng));
        total += m.weights.back();
        m.components.push_back({{{2.0 + 3.0 * uniform01(rng), 1.0 + 5.0 * uniform01(rng), 2.0, 1.0},
                                 {1.0 + 2.0 * uniform01(rng), 1.0 + 5.0 * uniform01(rng), 3.0, 1.5}},
                                random_sigma(rng)});
    }
    for (auto& w : m.weights) w /= total;
    return m;
}

Block small_block(Rng& rng, std::size_t n) {
    Block b{"b", {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        b.times.push_back(0.3 * static_cast<double>(i));
        b.obs.push_back({1.0 + 3.0 * uniform01(rng), 0.5 + 2.0 * uniform01(rng)});
    }
    return b;
}

double linear_numerator(const Block& b, double w, const Component& c) {
    double prod = 1.0;
    for (std::size_t i = 0; i < b.size(); ++i) prod *= w * density(b.obs[i], eval_curve(b.times[i], c.curve), c.sigma);
    return prod;
}

}  // namespace

TEST_CASE("Covariance2") {
    const Covariance2 s(2.0, 3.0, -0.5);
    CHECK(s.var_cases() == 4.0);
    CHECK(s.var_deaths() == 9.0);
    CHECK(s.cov() == -3.0);
    CHECK(s.log_det() == doctest::Approx(std::log(36.0 - 9.0)));
    const auto [lo, hi] = s.eigenvalues();
    Eigen::Matrix2d m;
    m << 4.0, -3.0, -3.0, 9.0;
    const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues();
    CHECK(lo == doctest::Approx(ev[0]).epsilon(1e-14));
    CHECK(hi == doctest::Approx(ev[1]).epsilon(1e-14));
    CHECK_THROWS(Covariance2(1.0, 1.0, 1.0));
    CHECK_THROWS(Covariance2(0.0, 1.0, 0.0));
    CHECK_FALSE(Covariance2::from_entries(1.0, 0.0, 0.0).has_value());
    CHECK_FALSE(Covariance2::from_entries(1.0, 1.0, 1.0).has_value());
    const auto e = Covariance2::from_entries(4.0, 9.0, -3.0);
    REQUIRE(e);
    CHECK(e->rho() == doctest::Approx(-0.5).epsilon(1e-15));
    // tiny eigenvalue stays accurate
    const Covariance2 thin(1.0, 1.0, 1.0 - 1e-13);
    CHECK(thin.eigenvalues().first == doctest::Approx(1e-13).epsilon(1e-2));
}

TEST_CASE("log_density_bivariate") {
    const double log2pi = std::log(2.0 * std::numbers::pi);
    CHECK(log_density_bivariate({1.0, 2.0}, {1.0, 2.0}, Covariance2::identity()) == doctest::Approx(-log2pi).epsilon(1e-15));
    CHECK(log_density_bivariate({2.0, 0.0}, {1.0, 0.0}, Covariance2::identity()) ==
          doctest::Approx(-log2pi - 0.5).epsilon(1e-15));
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const auto s = random_sigma(rng);
        const Observation y{4.0 * uniform01(rng), 4.0 * uniform01(rng)};
        const std::pair<double, double> mu{4.0 * uniform01(rng), 4.0 * uniform01(rng)};
        CHECK(log_density_bivariate(y, mu, s) == doctest::Approx(dense_log_density(y, mu, s)).epsilon(1e-11));
    }
}

TEST_CASE("block_log_score") {
    Rng rng(5);
    const auto m = small_model(rng, 2);
    const auto one = small_block(rng, 1);
    const auto& c = m.components[0];
    CHECK(block_log_score(one, 0.3, c) ==
          doctest::Approx(std::log(0.3) + log_density_bivariate(one.obs[0], eval_curve(0.0, c.curve), c.sigma)));
    const auto three = small_block(rng, 3);
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += log_density_bivariate(three.obs[i], eval_curve(three.times[i], c.curve), c.sigma);
    CHECK(block_log_score(three, 1.0, c) == doctest::Approx(sum).epsilon(1e-14));
    CHECK(std::exp(block_log_score(three, 0.4, c)) == doctest::Approx(linear_numerator(three, 0.4, c)).epsilon(1e-11));
}

TEST_CASE("posterior_row") {
    Rng rng(9);
    auto m = small_model(rng, 1);
    const auto b = small_block(rng, 4);
    const auto one = posterior_row(b, m);
    CHECK(one.tau == std::vector<double>{1.0});

    m.components.push_back(m.components[0]);
    m.weights = {0.5, 0.5};
    const auto half = posterior_row(b, m);
    CHECK(half.tau[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(half.tau[1] == doctest::Approx(0.5).epsilon(1e-15));

    const auto two = small_model(rng, 2);
    const auto b2 = small_block(rng, 2);
    const double n0 = linear_numerator(b2, two.weights[0], two.components[0]);
    const double n1 = linear_numerator(b2, two.weights[1], two.components[1]);
    const auto row = posterior_row(b2, two);
    CHECK(row.tau[0] == doctest::Approx(n0 / (n0 + n1)).epsilon(1e-12));
    CHECK(row.log_normalizer == doctest::Approx(std::log(n0 + n1)).epsilon(1e-12));
}

TEST_CASE("softmax shift invariance and long blocks") {
    std::vector<double> a{-1.0, 2.0, 0.5};
    std::vector<double> b{-1.0 - 1e4, 2.0 - 1e4, 0.5 - 1e4};
    const double la = softmax_in_place(a);
    const double lb = softmax_in_place(b);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
    CHECK(la - lb == doctest::Approx(1e4));

    // 400 points underflow the product form; the row must still be proper
    Rng rng(21);
    const auto m = small_model(rng, 3);
    const auto b400 = small_block(rng, 400);
    const auto row = posterior_row(b400, m);
    double s = 0.0;
    for (double t : row.tau) {
        CHECK(t >= 0.0);
        s += t;
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
    CHECK(std::isfinite(row.log_normalizer));
}

TEST_CASE("loglik") {
    Rng rng(31);
    auto m1 = small_model(rng, 1);
    const std::vector<Block> one{small_block(rng, 5)};
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        sum += log_density_bivariate(one[0].obs[i], eval_curve(one[0].times[i], m1.components[0].curve), m1.components[0].sigma);
    }
    CHECK(loglik(one, m1) == doctest::Approx(sum).epsilon(1e-14));

    const auto m = small_model(rng, 3);
    std::vector<Block> blocks{small_block(rng, 3), small_block(rng, 2), small_block(rng, 4)};
    const double l = loglik(blocks, m);
    double brute = 0.0;
    for (const auto& b : blocks) {
        double mix = 0.0;
        for (std::size_t k = 0; k < 3; ++k) mix += linear_numerator(b, m.weights[k], m.components[k]);
        brute += std::log(mix);
    }
    CHECK(l == doctest::Approx(brute).epsilon(1e-11));
    auto doubled = blocks;
    doubled.insert(doubled.end(), blocks.begin(), blocks.end());
    CHECK(loglik(doubled, m) == doctest::Approx(2.0 * l).epsilon(1e-14));
}

TEST_CASE("classify") {
    Posteriors p({"a", "b", "c"}, 2);
    p.at(0, 0) = 0.9;
    p.at(0, 1) = 0.1;
    p.at(1, 0) = 0.5;
    p.at(1, 1) = 0.5;
    p.at(2, 0) = 0.2;
    p.at(2, 1) = 0.8;
    const auto a = classify(p);
    REQUIRE(a.size() == 3);
    CHECK(a[0].label == 0);
    CHECK(a[1].label == 0);
    CHECK(a[2].label == 1);
    CHECK(a[2].max_posterior == 0.8);
    CHECK(a[2].region_id == "c");
    CHECK(p.block_mass(1) == doctest::Approx(1.4));

    Posteriors single({"x", "y"}, 1);
    single.at(0, 0) = single.at(1, 0) = 1.0;
    for (const auto& s : classify(single)) CHECK(s.label == 0);
}

TEST_CASE("free parameter count matches a literal enumeration") {
    for (int K = 1; K <= 7; ++K) {
        int count = 0;
        for (int k = 0; k < K; ++k) {
            count += 4;  // cases a, b, c, gamma
            count += 4;  // deaths a, b, c, gamma
            count += 3;  // sigma1, sigma2, rho
        }
        count += K - 1;  // weights on the simplex
        CHECK(free_parameter_count(K) == count);
    }
    CHECK(free_parameter_count(6) == 71);
}

TEST_CASE("MixtureModel::validate") {
    auto m = epimix::testing::three_group_truth();
    CHECK_NOTHROW(m.validate());
    m.weights[0] += 1e-9;
    CHECK_THROWS(m.validate());
    CHECK_NOTHROW(m.validate(1e-6));
    m.weights = {1.0, 0.0, 0.0};
    CHECK_THROWS(m.validate());
    m.weights = {0.5, 0.5};
    CHECK_THROWS(m.validate());
}

TEST_CASE("sampling") {
    auto truth = epimix::testing::three_group_truth();
    const std::vector<double> times{0.0, 0.1, 0.2, 0.3};
    const auto a = sample_block(truth, times, 99, "x");
    const auto b = sample_block(truth, times, 99, "x");
    CHECK(a.block == b.block);
    CHECK(a.label == b.label);
    CHECK(a.label < 3);

    auto quiet = truth;
    for (auto& c : quiet.components) c.sigma = Covariance2(1e-9, 1e-9, 0.3);
    const auto q = sample_component_block(quiet, 1, times, 5);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const auto [h1, h2] = eval_curve(times[i], quiet.components[1].curve);
        CHECK(std::abs(q.obs[i].cases - h1) < 1e-6);
        CHECK(std::abs(q.obs[i].deaths - h2) < 1e-6);
    }

    // label frequencies follow the weights
    truth.weights = {0.2, 0.3, 0.5};
    std::vector<int> counts(3, 0);
    for (std::uint64_t s = 0; s < 4000; ++s) ++counts[sample_block(truth, times, s).label];
    CHECK(counts[0] / 4000.0 == doctest::Approx(0.2).epsilon(0.1));
    CHECK(counts[2] / 4000.0 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("sampled covariance matches sigma") {
    MixtureModel m;
    m.weights = {1.0};
    m.components = {{{{10.0, 2.0, 1.0, 1.0}, {3.0, 2.0, 1.0, 1.0}}, Covariance2(2.0, 0.5, 0.6)}};
    const std::vector<double> t{0.5};
    const auto [mu1, mu2] = eval_curve(0.5, m.components[0].curve);
    double s11 = 0.0;
    double s22 = 0.0;
    double s12 = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto o = sample_component_block(m, 0, t, derive_seed(1, 2, i)).obs[0];
        s11 += (o.cases - mu1) * (o.cases - mu1);
        s22 += (o.deaths - mu2) * (o.deaths - mu2);
        s12 += (o.cases - mu1) * (o.deaths - mu2);
    }
    CHECK(s11 / n == doctest::Approx(4.0).epsilon(0.05));
    CHECK(s22 / n == doctest::Approx(0.25).epsilon(0.05));
    CHECK(s12 / n == doctest::Approx(0.6).epsilon(0.05));
}
