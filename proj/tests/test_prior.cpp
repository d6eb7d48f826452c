#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <map>

#include "adapart/errors.hpp"
#include "adapart/prior.hpp"
#include "adapart/rng.hpp"
#include "helpers.hpp"

using namespace adapart;

namespace {

PriorParams default_params(int n_cap) {
  PriorParams p;
  p.n_cap = n_cap;
  return p;
}

}  // namespace

TEST_CASE("parameter validation") {
  auto p = default_params(10);
  CHECK_NOTHROW(p.validate());
  SUBCASE("alpha outside (0,1)") {
    p.alpha = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.alpha = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("nonpositive lambda") {
    p.lambda = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("empty truncated simplex") {
    p.trunc_D = 2.0;
    p.trunc_kappa = 0.1;  // tau(2) = 2 * 2^-0.1 > 1/2
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
  SUBCASE("missing size cap") {
    p.n_cap = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }
}

TEST_CASE("tau follows D * I^-kappa") {
  auto p = default_params(10);
  p.trunc_D = 2.0;
  p.trunc_kappa = 3.0;
  CHECK(p.tau(2) == doctest::Approx(2.0 / 8.0).epsilon(1e-15));
  CHECK(p.tau(10) == doctest::Approx(2.0e-3).epsilon(1e-12));
}

TEST_CASE("log prior over partitions: normalization and uniformity") {
  PriorModel prior(default_params(3), 2);
  const auto q1 = BinaryPartition::unit_cube(2);
  // I = 1: log prior = -log Z.
  const double log_z = -prior.log_prior_partition(q1);
  CHECK(log_z > 0.0);

  // Same size => identical prior mass.
  const auto size3 = enumerate_partitions(3, 2);
  REQUIRE(size3.size() == 8);
  for (const auto& q : size3)
    CHECK(prior.log_prior_partition(q) == prior.log_prior_partition(size3.front()));

  // Enumeration oracle: total mass over sizes 1..n_cap is 1.
  double total = 0.0;
  for (int I = 1; I <= 3; ++I)
    for (const auto& q : enumerate_partitions(I, 2))
      total += std::exp(prior.log_prior_partition(q));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  // Per-size mass matches exp(-lambda I log I)/Z.
  double mass3 = 0.0;
  for (const auto& q : size3) mass3 += std::exp(prior.log_prior_partition(q));
  CHECK(mass3 == doctest::Approx(std::exp(-3.0 * std::log(3.0)) / std::exp(log_z))
                     .epsilon(1e-10));

  auto rng = make_rng(1);
  CHECK_THROWS_AS(prior.log_prior_partition(testutil::random_partition(rng, 2, 4)),
                  ZeroPriorMassError);
}

TEST_CASE("log prior of weights") {
  PriorModel prior(default_params(8), 1);
  SUBCASE("size one is a point mass") {
    const double one[] = {1.0};
    CHECK(prior.log_prior_weights(one, 1) == 0.0);
  }
  SUBCASE("truncation region") {
    const double tau = prior.params().tau(2);
    const double inside[] = {0.5, 0.5};
    CHECK(std::isfinite(prior.log_prior_weights(inside, 2)));
    const double outside[] = {tau * 0.5, 1.0 - tau * 0.5};
    CHECK(prior.log_prior_weights(outside, 2) ==
          -std::numeric_limits<double>::infinity());
  }
  SUBCASE("malformed theta") {
    const double bad[] = {0.6, 0.6};
    CHECK_THROWS_AS(prior.log_prior_weights(bad, 2), std::invalid_argument);
  }
}

TEST_CASE("truncated Dirichlet density integrates to one (I=2 quadrature)") {
  PriorModel prior(default_params(8), 1);
  const double tau = prior.params().tau(2);
  const double alpha = prior.params().alpha;
  // Integrate exp(log_prior_weights) over theta_1 in (tau, 1 - tau).
  const double integral = integrate_1d(
      [&](double t) {
        const double theta[] = {t, 1.0 - t};
        return std::exp(prior.log_prior_weights(theta, 2));
      },
      tau, 1.0 - tau, 1e-10);
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  (void)alpha;
}

TEST_CASE("truncation acceptance: Beta CDF closed form vs Monte Carlo") {
  auto params = default_params(8);
  params.trunc_D = 0.04;  // tau(2) = 0.01
  params.trunc_kappa = 2.0;
  PriorModel prior(params, 1);
  const double tau = params.tau(2);
  CHECK(tau == doctest::Approx(0.01).epsilon(1e-12));
  const double closed = prior.truncation_acceptance(2);
  const double expected = boost::math::ibeta(params.alpha, params.alpha, 1.0 - tau) -
                          boost::math::ibeta(params.alpha, params.alpha, tau);
  CHECK(closed == doctest::Approx(expected).epsilon(1e-12));

  auto rng = make_rng(99);
  const long n = 1000000;
  long accepted = 0;
  for (long i = 0; i < n; ++i) {
    auto theta = sample_dirichlet_symmetric(rng, 2, params.alpha);
    if (std::min(theta[0], theta[1]) > tau) ++accepted;
  }
  const double mc = static_cast<double>(accepted) / n;
  const double se = std::sqrt(mc * (1.0 - mc) / n);
  CHECK(std::abs(closed - mc) <= 3.0 * se);
}

TEST_CASE("prior sampling: size distribution, partition uniformity, truncation") {
  PriorModel prior(default_params(5), 2);
  auto rng = make_rng(2024);
  const int n = 20000;
  std::map<int, int> size_counts;
  std::map<std::string, int> partition_counts_i3;
  for (int i = 0; i < n; ++i) {
    auto f = prior.sample(rng);
    ++size_counts[f.size()];
    if (f.size() == 3) ++partition_counts_i3[f.partition().key()];
    double min_theta = 1.0;
    for (int j = 0; j < f.size(); ++j) min_theta = std::min(min_theta, f.mass(j));
    // Size 1 is the degenerate simplex {1} where tau(1) = D = 1 is attained.
    CHECK(min_theta >= prior.params().tau(f.size()));
  }

  // Chi-squared against exp(-I log I)/Z over I = 1..5.
  double log_z = 0.0;
  {
    double z = 0.0;
    for (int I = 1; I <= 5; ++I) z += std::exp(-static_cast<double>(I) * std::log(I));
    log_z = std::log(z);
  }
  std::vector<double> observed, expected;
  for (int I = 1; I <= 5; ++I) {
    observed.push_back(size_counts[I]);
    expected.push_back(n * std::exp(-static_cast<double>(I) * std::log(I) - log_z));
  }
  // Pool tiny tail cells to keep expected counts reasonable.
  while (expected.size() > 2 && expected.back() < 5.0) {
    expected[expected.size() - 2] += expected.back();
    observed[observed.size() - 2] += observed.back();
    expected.pop_back();
    observed.pop_back();
  }
  CHECK(testutil::chi_squared_stat(observed, expected) <
        testutil::chi_squared_critical(static_cast<int>(observed.size()) - 1));

  // Conditioned on I = 3: uniform over the 8 distinct partitions.
  const auto all3 = enumerate_partitions(3, 2);
  REQUIRE(all3.size() == 8);
  long total3 = 0;
  for (const auto& [key, c] : partition_counts_i3) total3 += c;
  std::vector<double> obs3, exp3;
  for (const auto& q : all3) {
    obs3.push_back(partition_counts_i3[q.key()]);
    exp3.push_back(static_cast<double>(total3) / 8.0);
  }
  CHECK(testutil::chi_squared_stat(obs3, exp3) < testutil::chi_squared_critical(7));
}

TEST_CASE("uniform partition sampling by Metropolis chain matches enumeration") {
  // Force the chain path with a tiny enumeration budget.
  auto counts = std::make_shared<PartitionCountModel>(2, 2);
  PriorModel prior(default_params(6), 2, counts);
  auto rng = make_rng(7);
  std::map<std::string, int> freq;
  const int n = 4000;
  for (int i = 0; i < n; ++i) ++freq[prior.sample_uniform_partition(3, rng).key()];
  const auto all3 = enumerate_partitions(3, 2);
  std::vector<double> obs, expd;
  for (const auto& q : all3) {
    obs.push_back(freq[q.key()]);
    expd.push_back(n / 8.0);
  }
  CHECK(testutil::chi_squared_stat(obs, expd) < testutil::chi_squared_critical(7));
}

TEST_CASE("partition count model: exact small counts, Catalan estimate beyond") {
  PartitionCountModel model(1, 1000);
  CHECK(model.log_count(4) == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(model.is_exact(4));
  // In 1D the Catalan estimate is exact, so large I stays consistent.
  CHECK(model.log_count(12) == doctest::Approx(log_catalan(11)).epsilon(1e-9));

  PartitionCountModel tiny_budget(2, 4);
  CHECK(tiny_budget.log_count(2) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Estimated: log Catalan(2) + 2 log 2 = log(2 * 4) = log 8; true count 8.
  CHECK(tiny_budget.log_count(3) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(!tiny_budget.is_exact(3));
}

TEST_CASE("truncated Dirichlet draws respect the floor") {
  auto rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto theta = sample_truncated_dirichlet(rng, 4, 0.5, 0.02);
    double sum = 0.0, min_t = 1.0;
    for (double t : theta) {
      sum += t;
      min_t = std::min(min_t, t);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(min_t > 0.02);
  }
  // Hopeless truncation triggers a sampling error.
  CHECK_THROWS_AS(sample_truncated_dirichlet(rng, 4, 0.5, 0.2499, 2000), SamplingError);
}

TEST_CASE("dirichlet ball mass bound: shape and Monte Carlo domination") {
  // Monotone increasing in eps, decreasing in tau.
  double prev = 0.0;
  for (double eps : {0.05, 0.1, 0.15, 0.2}) {
    const double b = dirichlet_ball_mass_bound(3, 0.5, eps, 1e-4);
    CHECK(b > prev);
    prev = b;
  }
  prev = 1.0;
  for (double tau : {1e-6, 1e-4, 1e-3, 3e-3}) {
    const double b = dirichlet_ball_mass_bound(3, 0.5, 0.1, tau);
    CHECK(b < prev);
    prev = b;
  }
  // tau -> eps^2 sends the bound to zero.
  CHECK(dirichlet_ball_mass_bound(3, 0.5, 0.1, 0.01 * (1.0 - 1e-9)) < 1e-20);
  CHECK_THROWS_AS(dirichlet_ball_mass_bound(3, 0.5, 0.4, 1e-4), std::invalid_argument);
  CHECK_THROWS_AS(dirichlet_ball_mass_bound(3, 0.5, 0.2, 0.05), std::invalid_argument);

  // Monte Carlo ball mass at the barycenter dominates the bound.
  const int I = 3;
  const double alpha = 0.5, eps = 0.2, tau = 1e-4;
  auto rng = make_rng(17);
  const long n = 200000;
  long hits = 0;
  for (long i = 0; i < n; ++i) {
    auto theta = sample_truncated_dirichlet(rng, I, alpha, tau);
    double l1 = 0.0;
    for (double t : theta) l1 += std::abs(t - 1.0 / I);
    if (l1 <= 2.0 * eps) ++hits;
  }
  const double mass = static_cast<double>(hits) / n;
  const double se = std::sqrt(mass * (1.0 - mass) / n);
  CHECK(mass + 3.0 * se >= dirichlet_ball_mass_bound(I, alpha, eps, tau));
}
