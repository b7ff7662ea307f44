#include "asng/exp_family.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

using namespace asng;

namespace {

ProductParams one_categorical(std::vector<double> row, double theta_min = 0.0) {
  return ProductParams({oracle::categorical_block({std::move(row)}, theta_min)});
}

ProductParams one_gaussian(double mu, double sigma, double lo = -10, double hi = 10, double smin = 0.1,
                           double smax = 10, bool integer = false) {
  return ProductParams({oracle::gaussian_block({{mu, sigma, lo, hi, smin, smax, integer}})});
}

}  // namespace

TEST_SUITE("exp_family") {
  TEST_CASE("init_max_entropy gives uniform rows and centred Gaussians") {
    const auto p = init_max_entropy(Shape{{CategoricalSpec{{5, 5, 5}, std::nullopt}}});
    const auto& row = std::get<CategoricalBlock>(p.blocks()[0]).probs[0];
    CHECK(row == std::vector<double>(5, 0.2));

    const auto g =
        init_max_entropy(Shape{{GaussianSpec{{GaussianVarSpec{64, 256, true, std::nullopt, std::nullopt}}}}});
    const auto& gb = std::get<GaussianBlock>(g.blocks()[0]);
    CHECK(gb.mu[0] == 160.0);
    CHECK(gb.second_moment[0] == 160.0 * 160.0 + 96.0 * 96.0);
    CHECK(gb.sigma_max[0] == 96.0);
    CHECK(gb.sigma_min[0] == 0.25);
    CHECK(in_domain(g));
  }

  TEST_CASE("init_max_entropy on the toy layout") {
    const auto p = init_max_entropy(Shape{{CategoricalSpec{std::vector<int>(30, 5), std::nullopt}}});
    const auto& b = std::get<CategoricalBlock>(p.blocks()[0]);
    REQUIRE(b.probs.size() == 30);
    for (const auto& row : b.probs) CHECK(row == std::vector<double>(5, 0.2));
    CHECK(b.theta_min[0] == doctest::Approx(1.0 / 120.0));
    CHECK(p.n_theta() == 120);
    CHECK(in_domain(p));
  }

  TEST_CASE("init_max_entropy rejects invalid shapes") {
    CHECK_THROWS_AS(init_max_entropy(Shape{{CategoricalSpec{{1}, std::nullopt}}}), InvalidShape);
    CHECK_THROWS_AS(init_max_entropy(Shape{{GaussianSpec{{GaussianVarSpec{3, 3, true, {}, {}}}}}}), InvalidShape);
    CHECK_THROWS_AS(init_max_entropy(Shape{{GaussianSpec{{GaussianVarSpec{0, 1, false, {}, {}}}}}}), InvalidShape);
    // A single m=3 variable defaults to theta_min = 1/2, which no row can satisfy.
    CHECK_THROWS_AS(init_max_entropy(Shape{{CategoricalSpec{{3}, std::nullopt}}}), InvalidShape);
    CHECK_NOTHROW(init_max_entropy(Shape{{CategoricalSpec{{3}, 0.1}}}));
  }

  TEST_CASE("sample from a point mass") {
    const auto p = one_categorical({1.0, 0.0});
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(sample(p, rng).categories[0] == 0);
  }

  TEST_CASE("sample from a narrow Gaussian concentrates at its mean") {
    const double sigma = 1e-3;
    const auto p = one_gaussian(0.0, sigma, -1, 1, 1e-4, 1);
    Rng rng(2);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) sum += sample(p, rng).reals[0];
    CHECK(std::abs(sum / 10000) <= 4 * sigma / 100);
  }

  TEST_CASE("sample frequencies of a uniform row") {
    const auto p = one_categorical({0.25, 0.25, 0.25, 0.25});
    Rng rng(3);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 100000; ++i) ++counts[static_cast<std::size_t>(sample(p, rng).categories[0])];
    for (int c : counts) CHECK(std::abs(c / 100000.0 - 0.25) <= 0.01);
  }

  TEST_CASE("sample is deterministic for a given seed") {
    std::mt19937_64 gen(4);
    const auto p = oracle::random_interior(gen, 4, 5, 3);
    Rng a(77), b(77);
    for (int i = 0; i < 50; ++i) CHECK(sample(p, a) == sample(p, b));
  }

  TEST_CASE("sufficient statistics") {
    const auto p = one_categorical({0.2, 0.3, 0.5});
    CHECK(sufficient_statistics(p, MixedValue{{1}, {}}) == std::vector<double>{0, 1});
    CHECK(sufficient_statistics(p, MixedValue{{2}, {}}) == std::vector<double>{0, 0});
    CHECK(sufficient_statistics(p, MixedValue{{0}, {}}) == std::vector<double>{1, 0});
    CHECK_THROWS_AS(sufficient_statistics(p, MixedValue{{3}, {}}), InvalidValue);
    CHECK_THROWS_AS(sufficient_statistics(p, MixedValue{{-1}, {}}), InvalidValue);
    CHECK_THROWS_AS(sufficient_statistics(p, MixedValue{{0, 0}, {}}), InvalidValue);

    const auto g = one_gaussian(0.0, 1.0);
    CHECK(sufficient_statistics(g, MixedValue{{}, {2.0}}) == std::vector<double>{2.0, 4.0});
  }

  TEST_CASE("score") {
    const auto p = one_categorical({0.5, 0.5});
    CHECK(score(p, MixedValue{{0}, {}}) == std::vector<double>{0.5});
    CHECK(score(p, MixedValue{{1}, {}}) == std::vector<double>{-0.5});
    const auto g = one_gaussian(0.0, 1.0);
    CHECK(score(g, MixedValue{{}, {1.0}}) == std::vector<double>{1.0, 0.0});
  }

  TEST_CASE("fisher_quadratic_norm examples") {
    const auto p = one_categorical({0.5, 0.5});
    CHECK(fisher_quadratic_norm(p, std::vector<double>{1.0}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(fisher_quadratic_norm(p, std::vector<double>{0.0}) == 0.0);
    const auto g = one_gaussian(0.0, 1.0);
    CHECK(fisher_quadratic_norm(g, std::vector<double>{0.0, 1.0}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
    CHECK(fisher_quadratic_norm(g, std::vector<double>{0.0, 0.0}) == 0.0);
    CHECK_THROWS_AS(fisher_quadratic_norm(p, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  }

  TEST_CASE("Fisher metric is singular at degenerate parameters") {
    const auto p = one_categorical({1.0, 0.0});
    CHECK_THROWS_AS(fisher_quadratic_norm(p, std::vector<double>{1.0}), SingularMetric);
    CHECK_THROWS_AS(sqrt_fisher_apply(p, std::vector<double>{1.0}), SingularMetric);
    GaussianBlock g = oracle::gaussian_block({{1.0, 0.0, -5, 5, 0, 5}});
    const ProductParams q({g});
    CHECK_THROWS_AS(fisher_quadratic_norm(q, std::vector<double>{1.0, 0.0}), SingularMetric);
  }

  TEST_CASE("sqrt_fisher_apply examples") {
    const auto p = one_categorical({0.5, 0.5});
    CHECK(sqrt_fisher_apply(p, std::vector<double>{1.0})[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(sqrt_fisher_apply(p, std::vector<double>{0.0})[0] == 0.0);
    const auto g = one_gaussian(0.0, 1.0);
    const auto r = sqrt_fisher_apply(g, std::vector<double>{1.0, 0.0});
    CHECK(r[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(r[1]) < 1e-14);
    const auto r2 = sqrt_fisher_apply(g, std::vector<double>{0.0, 1.0});
    CHECK(r2[1] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  }

  TEST_CASE("property: analytic Fisher matrix inverts the enumerated covariance") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = oracle::random_interior(rng, 3, 5, 3);
      const std::size_t n = p.n_theta();
      const auto prod = oracle::matmul(fisher_matrix(p), oracle::brute_force_inverse_fisher(p), n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(prod[i * n + j] - (i == j ? 1.0 : 0.0)) <= 1e-8);
    }
  }

  TEST_CASE("property: factor norm equals the Fisher norm and the quadratic form matches the dense matrix") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 200; ++trial) {
      const auto p = oracle::random_interior(rng, 4, 6, 4);
      const std::size_t n = p.n_theta();
      const auto f = fisher_matrix(p);
      std::vector<double> v(n);
      for (double& x : v) x = normal(rng);
      double dense = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) dense += v[i] * f[i * n + j] * v[j];
      const double qn = fisher_quadratic_norm(p, v);
      CHECK(qn * qn == doctest::Approx(dense).epsilon(1e-10));
      double sq = 0.0;
      for (double x : sqrt_fisher_apply(p, v)) sq += x * x;
      CHECK(std::sqrt(sq) == doctest::Approx(qn).epsilon(1e-10));
    }
  }

  TEST_CASE("project example row") {
    CategoricalBlock b;
    b.probs = {{0.05, 0.15, 0.80}, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}};
    b.theta_min.assign(4, 0.125);  // 1 / (n_c (m - 1)) with n_c = 4, m = 3
    const auto out = project(ProductParams({b}));
    const auto& row = std::get<CategoricalBlock>(out.blocks()[0]).probs[0];
    CHECK(row[0] == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(row[1] == doctest::Approx(0.1473214286).epsilon(1e-9));
    CHECK(row[2] == doctest::Approx(0.7276785714).epsilon(1e-9));
    CHECK(std::abs(row[0] + row[1] + row[2] - 1.0) <= 1e-12);
    // The feasible rows are untouched.
    CHECK(std::get<CategoricalBlock>(out.blocks()[0]).probs[1] == b.probs[1]);
  }

  TEST_CASE("project leaves feasible parameters unchanged") {
    const auto p = one_categorical({0.3, 0.3, 0.4}, 0.1);
    CHECK(project(p) == p);
  }

  TEST_CASE("project clips a Gaussian state") {
    GaussianBlock g = oracle::gaussian_block({{160, 96, 64, 256, 0.25, 96, true}});
    g.mu[0] = 300.0;
    g.second_moment[0] = 90100.0;
    const auto out = project(ProductParams({g}));
    const auto& gb = std::get<GaussianBlock>(out.blocks()[0]);
    CHECK(gb.mu[0] == 256.0);
    CHECK(gb.second_moment[0] >= 256.0 * 256.0 + 0.0625);
    CHECK(gb.second_moment[0] <= 256.0 * 256.0 + 9216.0);
    CHECK(in_domain(out));
  }

  TEST_CASE("project reports rows with no mass above the bound") {
    // A bound above 1/m cannot be met; every entry is clipped and the row
    // falls back to uniform.
    const auto p = one_categorical({0.5, 0.5}, 0.6);
    ProjectionEvents events;
    const auto out = project(p, &events);
    CHECK(events.degenerate_rows == 1);
    CHECK(std::get<CategoricalBlock>(out.blocks()[0]).probs[0] == std::vector<double>{0.5, 0.5});
  }

  TEST_CASE("property: projection is idempotent and lands in the domain") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 2000; ++trial) {
      const auto p = oracle::random_interior(rng, 4, 6, 3);
      std::vector<double> d(p.n_theta());
      for (double& x : d) x = normal(rng);
      const auto once = project(p.shifted(d, std::pow(10.0, oracle::uniform(rng, -3, 1))));
      CHECK(project(once) == once);
      CHECK(in_domain(once));
    }
  }

  TEST_CASE("property: sampling after an update and projection yields valid values") {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> normal;
    Rng draw(13);
    for (int trial = 0; trial < 300; ++trial) {
      const auto p = oracle::random_interior(rng, 4, 6, 3);
      std::vector<double> d(p.n_theta());
      for (double& x : d) x = normal(rng);
      const auto q = project(p.shifted(d, 5.0));
      for (int i = 0; i < 20; ++i) {
        const auto c = sample(q, draw);
        CHECK_NOTHROW(sufficient_statistics(q, c));
        for (double r : c.reals) CHECK(std::isfinite(r));
      }
    }
  }

  TEST_CASE("property: the score has zero mean") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<std::vector<double>> rows;
      const int n = 1 + static_cast<int>(rng() % 3);
      for (int i = 0; i < n; ++i) rows.push_back(oracle::random_row(rng, 2 + rng() % 4, 0.01));
      const ProductParams p({oracle::categorical_block(rows, 0.0)});
      std::vector<double> mean(p.n_theta(), 0.0);
      for (const auto& [c, prob] : oracle::enumerate_categories(rows)) {
        const auto s = score(p, MixedValue{c, {}});
        for (std::size_t k = 0; k < s.size(); ++k) mean[k] += prob * s[k];
      }
      for (double m : mean) CHECK(std::abs(m) <= 1e-15);
    }
    // Gaussian: E[c] = mu and E[c^2] = mu^2 + sigma^2 in closed form.
    for (int trial = 0; trial < 100; ++trial) {
      const double mu = oracle::uniform(rng, -5, 5);
      const double sigma = oracle::uniform(rng, 0.1, 3);
      const auto p = one_gaussian(mu, sigma);
      const auto theta = p.flatten();
      CHECK(std::abs(mu - theta[0]) <= 1e-12);
      CHECK(std::abs(mu * mu + sigma * sigma - theta[1]) <= 1e-12 * std::max(1.0, theta[1]));
    }
  }

  TEST_CASE("property: score, flatten and sufficient statistics share one layout") {
    std::mt19937_64 rng(15);
    Rng draw(15);
    for (int trial = 0; trial < 200; ++trial) {
      const auto p = oracle::random_interior(rng, 4, 6, 3);
      const auto c = sample(p, draw);
      const auto t = sufficient_statistics(p, c);
      const auto theta = p.flatten();
      const auto s = score(p, c);
      REQUIRE(t.size() == p.n_theta());
      REQUIRE(theta.size() == p.n_theta());
      for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(s[k] == t[k] - theta[k]);
        CHECK(s[k] + theta[k] == doctest::Approx(t[k]).epsilon(1e-15));
      }
    }
  }

  TEST_CASE("shifted keeps rows normalized and is exact at scale zero") {
    std::mt19937_64 rng(16);
    const auto p = oracle::random_interior(rng, 4, 6, 3);
    std::vector<double> d(p.n_theta(), 0.37);
    CHECK(p.shifted(d, 0.0) == p);
    const auto q = p.shifted(d, 0.01);
    const auto a = p.flatten();
    const auto b = q.flatten();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(a[k] + 0.0037));
  }

  TEST_CASE("ProductParams validates structure") {
    CHECK_THROWS_AS(ProductParams({oracle::categorical_block({{0.5, 0.6}}, 0.0)}), InvalidValue);
    CHECK_THROWS_AS(ProductParams({oracle::categorical_block({{1.0}}, 0.0)}), InvalidShape);
    CHECK_THROWS_AS(ProductParams({oracle::categorical_block({{NAN, 0.5}}, 0.0)}), InvalidValue);
    CategoricalBlock b = oracle::categorical_block({{0.5, 0.5}}, 0.0);
    b.theta_min.clear();
    CHECK_THROWS_AS(ProductParams({b}), InvalidShape);
  }

  TEST_CASE("most_likely") {
    CHECK(most_likely(one_categorical({0.1, 0.7, 0.2})).categories[0] == 1);
    CHECK(most_likely(one_categorical({0.5, 0.5})).categories[0] == 0);
    GaussianBlock g = oracle::gaussian_block({{127.6, 10, 64, 256, 0.25, 96, true}});
    CHECK(most_likely(ProductParams({g})).reals[0] == 128.0);
    g.mu[0] = 300.0;
    g.second_moment[0] = 300.0 * 300.0 + 1.0;
    CHECK(most_likely(ProductParams({g})).reals[0] == 256.0);
    CHECK(round_half_away(2.5) == 3.0);
    CHECK(round_half_away(-2.5) == -3.0);
  }

  TEST_CASE("clip_and_round") {
    const ProductParams p({oracle::categorical_block({{0.5, 0.5}}, 0.0),
                           oracle::gaussian_block({{2, 0.5, 1, 3, 0.25, 1, true}, {0, 1, -1, 1, 0.1, 1, false}})});
    CHECK(clip_and_round(p, MixedValue{{1}, {3.7, 0.3}}) == MixedValue{{1}, {3.0, 0.3}});
    CHECK(clip_and_round(p, MixedValue{{0}, {1.49, -4.0}}) == MixedValue{{0}, {1.0, -1.0}});
  }

  TEST_CASE("parse_shape") {
    const auto s = parse_shape(
        "# two categorical, then ordinal\n"
        "categorical 3\n"
        "categorical 4\n"
        "\n"
        "integer 64 256\n"
        "real -1 1 sigma_min=0.01 sigma_max=0.5\n"
        "categorical 2 theta_min=0.05\n");
    REQUIRE(s.blocks.size() == 3);
    CHECK(std::get<CategoricalSpec>(s.blocks[0]).categories == std::vector<int>{3, 4});
    const auto& g = std::get<GaussianSpec>(s.blocks[1]);
    REQUIRE(g.vars.size() == 2);
    CHECK(g.vars[0].integer);
    CHECK(g.vars[1].sigma_min == 0.01);
    CHECK(g.vars[1].sigma_max == 0.5);
    CHECK(std::get<CategoricalSpec>(s.blocks[2]).theta_min == 0.05);
    CHECK(s.n_theta() == 2 + 3 + 4 + 1);
    CHECK(s.n_categorical() == 3);
    CHECK(s.n_gaussian() == 2);
  }

  TEST_CASE("parse_shape errors name the line") {
    CHECK_THROWS_WITH_AS(parse_shape("categorical 3\ncategorical x\n"), doctest::Contains("line 2"), InvalidShape);
    CHECK_THROWS_WITH_AS(parse_shape("real 0 1\n"), doctest::Contains("sigma_min"), InvalidShape);
    CHECK_THROWS_AS(parse_shape("bogus 1\n"), InvalidShape);
    CHECK_THROWS_AS(parse_shape("categorical 1\n"), InvalidShape);
    CHECK_THROWS_AS(parse_shape("# nothing\n"), InvalidShape);
  }
}
