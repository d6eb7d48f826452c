#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "adapart/density.hpp"
#include "adapart/dyadic.hpp"

namespace adapart {

/// Hyperparameters of the prior over partition-supported densities:
/// partition sizes are penalized proportionally to exp(-lambda * I * log I),
/// the partition is uniform within each size, and region weights follow a
/// symmetric Dirichlet(alpha) truncated below at tau(I) = D * I^-kappa.
/// Prior mass is zero for sizes above n_cap.
struct PriorParams {
  double lambda = 1.0;
  double alpha = 0.5;
  double trunc_D = 1.0;
  double trunc_kappa = 6.0;
  int n_cap = 0;

  double tau(int I) const;
  /// Enforces alpha in (0,1), positive lambda/D/kappa, and a nonempty
  /// truncated simplex (tau(I) < 1/I) for every admissible size.
  void validate() const;
};

/// log T_I provider. Exact counts come from dedup enumeration and are cached;
/// beyond the enumeration budget the count is estimated by
/// Catalan(I-1) * p^(I-1), which is exact for p = 1 and counts split schemes
/// (a slight overcount of distinct partitions) for p >= 2.
class PartitionCountModel {
 public:
  explicit PartitionCountModel(int dim, std::uint64_t enum_budget = 200'000);

  double log_count(int I) const;
  bool is_exact(int I) const;
  int dim() const { return dim_; }

 private:
  int dim_;
  std::uint64_t enum_budget_;
  mutable std::map<int, std::pair<double, bool>> cache_;  // I -> (log T_I, exact)
  mutable int first_inexact_ = 0;                         // 0 = none known yet
  mutable std::mutex mutex_;
};

double log_catalan(int m);

class PriorModel {
 public:
  PriorModel(PriorParams params, int dim,
             std::shared_ptr<PartitionCountModel> counts = nullptr);

  const PriorParams& params() const { return params_; }
  int dim() const { return dim_; }
  const PartitionCountModel& counts() const { return *counts_; }

  /// log prior probability of the set of densities supported by q:
  /// -lambda I log I - log T_I - log Z. Throws ZeroPriorMassError for
  /// I > n_cap.
  double log_prior_partition(const BinaryPartition& q) const;

  /// Size marginal alone: -lambda I log I - log Z.
  double log_prior_size(int I) const;

  /// log density of the truncated Dirichlet weight prior given a size-I
  /// partition; -infinity (zero mass, not an error) when min theta <= tau(I).
  double log_prior_weights(std::span<const double> theta, int I) const;

  /// Acceptance probability of the truncation region under the untruncated
  /// Dirichlet; closed-form Beta CDF for I = 2, cached Monte Carlo otherwise.
  double truncation_acceptance(int I) const;

  /// Draws a full piecewise density from the prior.
  PiecewiseDensity sample(std::mt19937_64& rng) const;

  /// Draws a partition uniformly over the distinct size-I partitions:
  /// exactly via enumeration when feasible, otherwise by a uniformizing
  /// Metropolis chain on the split/merge graph.
  BinaryPartition sample_uniform_partition(int I, std::mt19937_64& rng) const;

 private:
  PriorParams params_;
  int dim_;
  std::shared_ptr<PartitionCountModel> counts_;
  double log_z_;  // normalizer of the size distribution
  mutable std::map<int, double> acceptance_cache_;
  mutable std::map<int, std::vector<BinaryPartition>> enum_cache_;
  mutable std::mutex mutex_;
};

/// Symmetric and general Dirichlet draws.
std::vector<double> sample_dirichlet(std::mt19937_64& rng, std::span<const double> alpha);
std::vector<double> sample_dirichlet_symmetric(std::mt19937_64& rng, int I, double alpha);

/// Rejection draw from the Dirichlet truncated below at tau. Throws
/// SamplingError (reporting tau, alpha, I) when the acceptance rate is
/// hopeless.
std::vector<double> sample_truncated_dirichlet(std::mt19937_64& rng, int I, double alpha,
                                               double tau, long max_tries = 1'000'000);
std::vector<double> sample_truncated_dirichlet(std::mt19937_64& rng,
                                               std::span<const double> alpha, double tau,
                                               long max_tries = 1'000'000);

/// Analytic lower bound Gamma(alpha I)/Gamma(alpha)^I * (eps^2 - tau)^I for
/// the truncated-Dirichlet mass of the L1 ball of radius 2*eps around any
/// simplex point; requires eps < 1/I and tau < eps^2.
double dirichlet_ball_mass_log_bound(int I, double alpha, double eps, double tau);
double dirichlet_ball_mass_bound(int I, double alpha, double eps, double tau);

}  // namespace adapart
