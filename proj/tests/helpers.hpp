#pragma once

// Shared utilities for the test suites: random model generation and
// independent statistical oracles.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "adapart/density.hpp"
#include "adapart/dyadic.hpp"
#include "adapart/rng.hpp"

namespace testutil {

using namespace adapart;

/// Random binary partition grown by uniform (region, axis) splits.
inline BinaryPartition random_partition(std::mt19937_64& rng, int dim, int size) {
  BinaryPartition q = BinaryPartition::unit_cube(dim);
  while (q.size() < size) {
    std::uniform_int_distribution<int> region(0, q.size() - 1);
    std::uniform_int_distribution<int> axis(0, dim - 1);
    q = q.split(region(rng), axis(rng));
  }
  return q;
}

/// Random weights bounded away from zero (so KL-type metrics are defined).
inline std::vector<double> random_weights(std::mt19937_64& rng, int size, double floor = 0.02) {
  std::gamma_distribution<double> gamma(1.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(size));
  double total = 0.0;
  for (double& x : w) total += (x = gamma(rng) + floor * size);
  for (double& x : w) x /= total;
  return w;
}

inline PiecewiseDensity random_density(std::mt19937_64& rng, int dim, int size,
                                       double floor = 0.02) {
  BinaryPartition q = random_partition(rng, dim, size);
  return PiecewiseDensity(std::move(q), random_weights(rng, size, floor));
}

/// Wraps a piecewise density as a sampling truth (without the exact
/// piecewise handle, so Monte Carlo paths are exercised).
inline TruthDensity as_mc_truth(const PiecewiseDensity& f) {
  TruthDensity t;
  t.dim = f.dim();
  auto copy = f;
  t.pdf = [copy](std::span<const double> y) { return copy.evaluate(y); };
  t.sampler = [copy](std::mt19937_64& rng, std::span<double> point) {
    copy.sample_into(rng, point);
  };
  return t;
}

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Mean and standard error of h(Y) under f.
template <typename H>
MomentEstimate mc_mean(const PiecewiseDensity& f, long n, std::uint64_t seed, H&& h) {
  auto rng = make_rng(seed);
  std::vector<double> point(static_cast<std::size_t>(f.dim()));
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; ++i) {
    f.sample_into(rng, point);
    const double v = h(std::span<const double>(point));
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

/// Pearson chi-squared statistic against expected counts.
inline double chi_squared_stat(const std::vector<double>& observed,
                               const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    stat += d * d / expected[i];
  }
  return stat;
}

inline double chi_squared_critical(int dof, double level = 0.01) {
  return boost::math::quantile(boost::math::chi_squared(dof), 1.0 - level);
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
template <typename Cdf>
double ks_stat(std::vector<double> draws, Cdf&& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double c = cdf(draws[i]);
    d = std::max(d, std::abs(c - static_cast<double>(i) / n));
    d = std::max(d, std::abs(c - static_cast<double>(i + 1) / n));
  }
  return d;
}

}  // namespace testutil
