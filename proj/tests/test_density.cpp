#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <numbers>

#include "adapart/density.hpp"
#include "adapart/errors.hpp"
#include "adapart/rng.hpp"
#include "helpers.hpp"

using namespace adapart;

namespace {

PiecewiseDensity halves_1d(double left_mass) {
  return PiecewiseDensity(BinaryPartition::unit_cube(1).split(0, 0),
                          {left_mass, 1.0 - left_mass});
}

PiecewiseDensity vertical_halves(double left_mass) {
  return PiecewiseDensity(BinaryPartition::unit_cube(2).split(0, 0),
                          {left_mass, 1.0 - left_mass});
}

}  // namespace

TEST_CASE("evaluate returns theta / volume") {
  auto uniform = PiecewiseDensity::uniform(2);
  const std::array<double, 2> y{0.9, 0.1};
  CHECK(uniform.evaluate(y) == 1.0);

  auto f = vertical_halves(0.75);
  const std::array<double, 2> left{0.3, 0.7};
  CHECK(f.evaluate(left) == doctest::Approx(1.5).epsilon(1e-15));
  const std::array<double, 2> right{0.7, 0.7};
  CHECK(f.evaluate(right) == doctest::Approx(0.5).epsilon(1e-15));

  // Region-wise integral: sum of height * volume = sum of weights = 1.
  double integral = 0.0;
  for (int i = 0; i < f.size(); ++i)
    integral += f.height(i) * f.partition().region(i).volume();
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("weights are validated") {
  auto q = BinaryPartition::unit_cube(1).split(0, 0);
  CHECK_THROWS_AS(PiecewiseDensity(q, {0.7, 0.2}), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseDensity(q, {1.2, -0.2}), std::invalid_argument);
  CHECK_THROWS_AS(PiecewiseDensity(q, {1.0}), std::invalid_argument);
}

TEST_CASE("sampling basics") {
  auto f = vertical_halves(0.75);
  CHECK(f.sample(0, 1).empty());
  CHECK(f.sample(50, 9) == f.sample(50, 9));
  CHECK(f.sample(50, 9) != f.sample(50, 10));

  const int n = 100000;
  auto draws = f.sample(n, 3);
  long left = 0;
  for (const auto& y : draws)
    if (y[0] < 0.5) ++left;
  const double se = std::sqrt(0.75 * 0.25 / n);
  CHECK(std::abs(left / static_cast<double>(n) - 0.75) <= 4.0 * se);
}

TEST_CASE("hellinger_exact closed forms") {
  auto f = halves_1d(1.0);  // density 2 on [0,1/2)
  auto g = PiecewiseDensity::uniform(1);
  CHECK(hellinger_exact(f, f) == 0.0);
  const double rho = hellinger_exact(f, g);
  CHECK(rho * rho == doctest::Approx(2.0 - std::sqrt(2.0)).epsilon(1e-14));
  CHECK(rho == doctest::Approx(0.7653668647301795).epsilon(1e-12));
}

TEST_CASE("hellinger_mc agrees with closed forms") {
  auto uniform = PiecewiseDensity::uniform(1);
  auto truth = testutil::as_mc_truth(uniform);
  auto same = hellinger_mc(truth, uniform, 1000, 4);
  CHECK(std::abs(same.estimate) <= 1e-12);

  auto g = halves_1d(1.0);
  auto est = hellinger_mc(truth, g, 200000, 4);
  CHECK(std::abs(est.estimate - 0.7653668647301795) <= 3.0 * est.std_error);

  auto est_small = hellinger_mc(truth, g, 50000, 5);
  auto est_big = hellinger_mc(truth, g, 100000, 5);
  CHECK(est_big.std_error < est_small.std_error);
  CHECK(est_small.std_error / est_big.std_error == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("kl_exact closed forms and support errors") {
  auto f = halves_1d(1.0);
  auto g = PiecewiseDensity::uniform(1);
  CHECK(kl_exact(g, g) == 0.0);
  CHECK(kl_exact(f, g) == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  CHECK_THROWS_AS(kl_exact(g, f), DivergenceError);  // g has mass where f = 0
}

TEST_CASE("logratio_variance closed forms") {
  auto f = halves_1d(1.0);
  auto g = PiecewiseDensity::uniform(1);
  CHECK(logratio_variance(f, f) == 0.0);
  // log(f/g) is constant (log 2) on f's support.
  CHECK(logratio_variance(f, g) == doctest::Approx(0.0).epsilon(1e-14));

  // Uniform against (3/4, 1/4) halves: two-point distribution of the ratio.
  auto h = halves_1d(0.75);
  const double a = std::log(1.0 / 1.5), b = std::log(1.0 / 0.5);
  const double mean = 0.5 * (a + b);
  const double expect = 0.5 * (a - mean) * (a - mean) + 0.5 * (b - mean) * (b - mean);
  CHECK(logratio_variance(g, h) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("logratio_variance agrees with Monte Carlo") {
  auto rng = make_rng(77);
  auto f = testutil::random_density(rng, 2, 4, 0.05);
  auto g = testutil::random_density(rng, 2, 4, 0.05);
  const double exact = logratio_variance(f, g);
  // Sample Var under f of log(f/g), with a delta-method standard error.
  const long n = 1000000;
  auto m1 = testutil::mc_mean(f, n, 13, [&](std::span<const double> y) {
    return std::log(f.evaluate(y) / g.evaluate(y));
  });
  auto m2 = testutil::mc_mean(f, n, 13, [&](std::span<const double> y) {
    const double v = std::log(f.evaluate(y) / g.evaluate(y));
    return v * v;
  });
  const double mc_var = m2.mean - m1.mean * m1.mean;
  const double se = std::sqrt(m2.std_error * m2.std_error +
                              4.0 * m1.mean * m1.mean * m1.std_error * m1.std_error);
  CHECK(std::abs(mc_var - exact) <= 3.0 * se);
}

TEST_CASE("l1_exact closed forms and bounds") {
  auto f = halves_1d(1.0);
  auto g = PiecewiseDensity::uniform(1);
  CHECK(l1_exact(f, f) == 0.0);
  CHECK(l1_exact(f, g) == doctest::Approx(1.0).epsilon(1e-14));

  auto rng = make_rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = testutil::random_density(rng, 2, 5);
    auto b = testutil::random_density(rng, 2, 5);
    const double rho = hellinger_exact(a, b);
    const double l1 = l1_exact(a, b);
    CHECK(rho * rho <= l1 + 1e-12);
    CHECK(l1 <= 2.0 + 1e-12);
    CHECK(kl_exact(a, b) + 1e-12 >= rho * rho);
  }
}

TEST_CASE("hellinger_exact is a metric") {
  auto rng = make_rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = testutil::random_density(rng, 2, 4);
    auto b = testutil::random_density(rng, 2, 4);
    auto c = testutil::random_density(rng, 2, 4);
    const double ab = hellinger_exact(a, b);
    CHECK(ab == hellinger_exact(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= std::sqrt(2.0) + 1e-12);
    CHECK(ab <= hellinger_exact(a, c) + hellinger_exact(c, b) + 1e-12);
  }
  auto a = testutil::random_density(rng, 2, 4);
  CHECK(hellinger_exact(a, a) == 0.0);
}

TEST_CASE("metrics are invariant under refinement") {
  auto rng = make_rng(47);
  auto f = testutil::random_density(rng, 2, 4, 0.05);
  auto g = testutil::random_density(rng, 2, 4, 0.05);
  auto refinement = common_refinement(f.partition(), testutil::random_partition(rng, 2, 6));
  auto f_fine = f.refined_to(refinement);

  // Same function, different representation.
  for (int trial = 0; trial < 20; ++trial) {
    std::array<double, 2> y{};
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    y = {unif(rng), unif(rng)};
    CHECK(f_fine.evaluate(y) == doctest::Approx(f.evaluate(y)).epsilon(1e-12));
  }
  CHECK(hellinger_exact(f_fine, g) == doctest::Approx(hellinger_exact(f, g)).epsilon(1e-12));
  CHECK(kl_exact(f_fine, g) == doctest::Approx(kl_exact(f, g)).epsilon(1e-12));
  CHECK(l1_exact(f_fine, g) == doctest::Approx(l1_exact(f, g)).epsilon(1e-12));
  CHECK(hellinger_exact(f_fine, f) <= 1e-12);
}

TEST_CASE("intersection cells tile the cube") {
  auto rng = make_rng(53);
  auto a = testutil::random_partition(rng, 2, 5);
  auto b = testutil::random_partition(rng, 2, 7);
  double total = 0.0;
  for (const auto& cell : intersection_cells(a, b)) {
    CHECK(intersection_volume(cell.box, a.region(cell.i)) == cell.box.volume());
    CHECK(intersection_volume(cell.box, b.region(cell.j)) == cell.box.volume());
    total += cell.box.volume();
  }
  CHECK(total == 1.0);

  auto refinement = common_refinement(a, b);
  CHECK(refinement.size() == static_cast<int>(intersection_cells(a, b).size()));
}

TEST_CASE("density serialization round-trips") {
  auto rng = make_rng(61);
  auto f = testutil::random_density(rng, 2, 5);
  auto back = PiecewiseDensity::deserialize(f.serialize());
  CHECK(back.partition() == f.partition());
  for (int i = 0; i < f.size(); ++i) CHECK(back.mass(i) == f.mass(i));
}

TEST_CASE("hellinger_to_truth uses the exact path for piecewise truths") {
  auto rng = make_rng(67);
  auto f = testutil::random_density(rng, 2, 4);
  auto g = testutil::random_density(rng, 2, 4);
  TruthDensity truth = testutil::as_mc_truth(f);
  truth.piecewise = f;
  CHECK(hellinger_to_truth(truth, g) == hellinger_exact(f, g));
}

TEST_CASE("1d quadrature route matches the exact metric") {
  auto f = halves_1d(0.75);
  auto g = halves_1d(0.4);
  TruthDensity truth = testutil::as_mc_truth(f);  // no piecewise handle, 1D
  CHECK(hellinger_to_truth(truth, g) ==
        doctest::Approx(hellinger_exact(f, g)).epsilon(1e-8));
}
