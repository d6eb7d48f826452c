#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adapart/density.hpp"
#include "adapart/dyadic.hpp"
#include "adapart/prior.hpp"

namespace adapart {

/// Observations in the unit cube, stored row-major.
class Dataset {
 public:
  Dataset(int dim, std::vector<double> coords);
  static Dataset from_points(const std::vector<std::vector<double>>& points);

  int dim() const { return dim_; }
  long n() const { return static_cast<long>(coords_.size()) / dim_; }
  std::span<const double> point(long j) const {
    return {coords_.data() + j * dim_, static_cast<std::size_t>(dim_)};
  }

 private:
  int dim_;
  std::vector<double> coords_;
};

/// N_i = number of observations in region i.
std::vector<long> region_counts(const Dataset& data, const BinaryPartition& q);

/// sum_i N_i log beta_i; -infinity when a zero-density region holds data.
double log_likelihood(const Dataset& data, const PiecewiseDensity& f);

/// Maximum-likelihood weights theta_i = N_i / n on a fixed partition.
PiecewiseDensity mle_fixed_partition(const Dataset& data, const BinaryPartition& q);

enum class SieveStrategy { exhaustive, greedy };

/// MLE over all size-I partitions (exhaustive, ties broken by canonical
/// order) or by greedy best-single-split search from the unit cube.
PiecewiseDensity sieve_mle(const Dataset& data, int I, SieveStrategy strategy,
                           std::uint64_t enum_cap = kDefaultEnumerationCap);

/// Collapsed marginal likelihood of a partition under the untruncated
/// symmetric Dirichlet(alpha) weight prior, in log space:
/// log[ Gamma(aI)/Gamma(aI+n) * prod_i Gamma(a+N_i)/Gamma(a) * prod_i
/// vol(region_i)^{-N_i} ].
double log_marginal_likelihood(const Dataset& data, const BinaryPartition& q, double alpha);
double log_marginal_from_counts(std::span<const long> counts, const BinaryPartition& q,
                                double alpha);

struct PosteriorEntry {
  BinaryPartition partition;
  double log_weight = 0.0;  // unnormalized log posterior weight
  double weight = 0.0;      // normalized
  std::vector<long> counts;
  std::vector<double> dirichlet_post;  // alpha + N_i, canonical region order
};

struct PosteriorSummary {
  std::vector<PosteriorEntry> entries;
  bool normalized = false;
  int mode_size = 0;
  double alpha = 0.0;
  long n = 0;

  std::map<int, double> size_distribution() const;

  std::string serialize() const;
  static PosteriorSummary deserialize(const std::string& text);
};

/// Exact posterior over all partitions of size <= I_max, by enumeration.
PosteriorSummary exact_posterior(const Dataset& data, const PriorModel& prior, int I_max,
                                 std::uint64_t enum_cap = kDefaultEnumerationCap);

struct McmcOptions {
  long iterations = 10'000;
  long burn_in = -1;  // negative: 10% of iterations
  long thin = 1;
  std::uint64_t seed = 0;
  bool prior_only = false;        // force the marginal likelihood to zero
  double p_split = 0.4;
  double p_merge = 0.4;
  double p_swap = 0.2;
  std::optional<BinaryPartition> init;
};

struct McmcDiagnostics {
  long proposed_split = 0, accepted_split = 0;
  long proposed_merge = 0, accepted_merge = 0;
  long proposed_swap = 0, accepted_swap = 0;
  bool record_transitions = false;
  std::map<std::pair<std::string, std::string>, long> transitions;  // serialized states
};

/// Collapsed Metropolis-Hastings over partition space with SPLIT, MERGE and
/// SWAP moves; weights are integrated out analytically. Visited partitions
/// are returned with their multiplicities as the posterior summary.
PosteriorSummary mcmc_posterior(const Dataset& data, const PriorModel& prior,
                                const McmcOptions& options,
                                McmcDiagnostics* diagnostics = nullptr);

/// Mixture of the per-partition Dirichlet-posterior mean densities,
/// represented exactly on the common refinement of the visited partitions.
PiecewiseDensity posterior_mean_density(const PosteriorSummary& summary,
                                        int refine_cap = 1 << 14);

/// Posterior probability that the Hellinger distance to the truth is at
/// least `radius`, estimated by drawing weight vectors from each
/// partition's (truncated) Dirichlet posterior.
double posterior_concentration_probability(const PosteriorSummary& summary,
                                           const TruthDensity& truth, double radius,
                                           long n_mc, std::uint64_t seed,
                                           const PriorParams& params);

}  // namespace adapart
