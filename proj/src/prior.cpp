#include "adapart/prior.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "adapart/errors.hpp"
#include "adapart/rng.hpp"

namespace adapart {

namespace {

double size_penalty(double lambda, int I) {
  return -lambda * static_cast<double>(I) * std::log(static_cast<double>(I));
}

}  // namespace

double PriorParams::tau(int I) const {
  return trunc_D * std::pow(static_cast<double>(I), -trunc_kappa);
}

void PriorParams::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(trunc_D > 0.0)) throw std::invalid_argument("trunc_D must be positive");
  if (!(trunc_kappa > 0.0)) throw std::invalid_argument("trunc_kappa must be positive");
  if (n_cap < 1) throw std::invalid_argument("n_cap must be at least 1");
  // tau(I) < 1/I keeps the truncated simplex nonempty; I = 1 is the point
  // mass theta = (1) and needs no truncation. tau(I)*I is monotone in I, so
  // the endpoints suffice.
  for (int I : {2, n_cap}) {
    if (I < 2) continue;
    if (tau(I) * I >= 1.0)
      throw std::invalid_argument("truncation tau(I) >= 1/I at I = " + std::to_string(I) +
                                  ": truncated simplex is empty");
  }
}

double log_catalan(int m) {
  if (m < 0) throw std::invalid_argument("catalan index must be nonnegative");
  return std::lgamma(2.0 * m + 1.0) - std::lgamma(m + 1.0) - std::lgamma(m + 2.0);
}

PartitionCountModel::PartitionCountModel(int dim, std::uint64_t enum_budget)
    : dim_(dim), enum_budget_(enum_budget) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
}

double PartitionCountModel::log_count(int I) const {
  if (I < 1) throw std::invalid_argument("partition size must be positive");
  if (dim_ == 1) return log_catalan(I - 1);
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = cache_.find(I);
  if (it != cache_.end()) return it->second.first;
  double value;
  bool exact;
  if (first_inexact_ != 0 && I >= first_inexact_) {
    value = log_catalan(I - 1) + (I - 1) * std::log(static_cast<double>(dim_));
    exact = false;
  } else {
    try {
      value = std::log(static_cast<double>(count_partitions(I, dim_, enum_budget_)));
      exact = true;
    } catch (const ResourceError&) {
      if (first_inexact_ == 0 || I < first_inexact_) first_inexact_ = I;
      value = log_catalan(I - 1) + (I - 1) * std::log(static_cast<double>(dim_));
      exact = false;
    }
  }
  cache_.emplace(I, std::make_pair(value, exact));
  return value;
}

bool PartitionCountModel::is_exact(int I) const {
  if (dim_ == 1) return true;
  log_count(I);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.at(I).second;
}

PriorModel::PriorModel(PriorParams params, int dim, std::shared_ptr<PartitionCountModel> counts)
    : params_(params), dim_(dim),
      counts_(counts ? std::move(counts) : std::make_shared<PartitionCountModel>(dim)) {
  params_.validate();
  if (counts_->dim() != dim_) throw std::invalid_argument("count model dimension mismatch");
  // Normalizer of the size distribution, in log space.
  double m = 0.0;  // max of the exponents (I = 1 gives 0)
  double acc = 0.0;
  for (int I = 1; I <= params_.n_cap; ++I) acc += std::exp(size_penalty(params_.lambda, I) - m);
  log_z_ = m + std::log(acc);
}

double PriorModel::log_prior_size(int I) const {
  if (I < 1) throw std::invalid_argument("partition size must be positive");
  if (I > params_.n_cap)
    throw ZeroPriorMassError("prior mass is zero for partition size " + std::to_string(I) +
                             " above the cap " + std::to_string(params_.n_cap));
  return size_penalty(params_.lambda, I) - log_z_;
}

double PriorModel::log_prior_partition(const BinaryPartition& q) const {
  return log_prior_size(q.size()) - counts_->log_count(q.size());
}

double PriorModel::truncation_acceptance(int I) const {
  if (I <= 1) return 1.0;
  const double tau = params_.tau(I);
  if (tau <= 0.0) return 1.0;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = acceptance_cache_.find(I);
    if (it != acceptance_cache_.end()) return it->second;
  }
  double acc;
  if (I == 2) {
    // min(X, 1-X) > tau for X ~ Beta(alpha, alpha).
    acc = boost::math::ibeta(params_.alpha, params_.alpha, 1.0 - tau) -
          boost::math::ibeta(params_.alpha, params_.alpha, tau);
  } else {
    const long n_draws = 200'000;
    auto rng = make_rng(derive_seed(0xacce97, static_cast<std::uint64_t>(I)));
    long ok = 0;
    for (long k = 0; k < n_draws; ++k) {
      auto theta = sample_dirichlet_symmetric(rng, I, params_.alpha);
      if (*std::min_element(theta.begin(), theta.end()) > tau) ++ok;
    }
    acc = static_cast<double>(ok) / static_cast<double>(n_draws);
    if (acc <= 0.0) acc = 0.5 / static_cast<double>(n_draws);
  }
  std::lock_guard<std::mutex> lock(mutex_);
  acceptance_cache_.emplace(I, acc);
  return acc;
}

double PriorModel::log_prior_weights(std::span<const double> theta, int I) const {
  if (static_cast<int>(theta.size()) != I)
    throw std::invalid_argument("weight vector length does not match partition size");
  double sum = 0.0;
  for (double t : theta) {
    if (!(t >= 0.0)) throw std::invalid_argument("weights must be nonnegative");
    sum += t;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("weights must sum to 1");
  if (I == 1) return 0.0;
  const double tau = params_.tau(I);
  const double min_theta = *std::min_element(theta.begin(), theta.end());
  if (min_theta <= tau) return -std::numeric_limits<double>::infinity();
  double log_dens = std::lgamma(params_.alpha * I) - I * std::lgamma(params_.alpha);
  for (double t : theta) log_dens += (params_.alpha - 1.0) * std::log(t);
  return log_dens - std::log(truncation_acceptance(I));
}

BinaryPartition PriorModel::sample_uniform_partition(int I, std::mt19937_64& rng) const {
  if (I == 1) return BinaryPartition::unit_cube(dim_);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = enum_cache_.find(I);
    if (it != enum_cache_.end()) {
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      return it->second[pick(rng)];
    }
  }
  bool enumerable = false;
  try {
    enumerable = counts_->is_exact(I) &&
                 std::exp(counts_->log_count(I)) <= 200'000.0;
  } catch (const ResourceError&) {
    enumerable = false;
  }
  if (enumerable) {
    auto all = enumerate_partitions(I, dim_, 400'000);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    BinaryPartition out = all[pick(rng)];
    std::lock_guard<std::mutex> lock(mutex_);
    enum_cache_.emplace(I, std::move(all));
    return out;
  }
  // Uniformizing Metropolis chain on the fixed-size slice of the
  // split/merge graph: merge a uniform sibling pair, re-split a uniform
  // (region, axis), accept with min(1, n_sib(q)/n_sib(q')).
  BinaryPartition q = BinaryPartition::unit_cube(dim_);
  std::uniform_int_distribution<int> axis_pick(0, dim_ - 1);
  for (int step = 1; step < I; ++step) {
    std::uniform_int_distribution<int> region_pick(0, q.size() - 1);
    q = q.split(region_pick(rng), axis_pick(rng));
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int burn = 100 * I;
  for (int step = 0; step < burn; ++step) {
    auto sibs = q.sibling_pairs();
    std::uniform_int_distribution<std::size_t> sib_pick(0, sibs.size() - 1);
    auto [a, b] = sibs[sib_pick(rng)];
    BinaryPartition mid = q.merge_siblings(a, b);
    std::uniform_int_distribution<int> region_pick(0, mid.size() - 1);
    const int region = region_pick(rng);
    const int axis = axis_pick(rng);
    if (mid.region(region).coord(axis).depth >= kMaxDepth) continue;
    BinaryPartition proposal = mid.split(region, axis);
    const double ratio = static_cast<double>(sibs.size()) /
                         static_cast<double>(proposal.sibling_pairs().size());
    if (unif(rng) < ratio) q = std::move(proposal);
  }
  return q;
}

PiecewiseDensity PriorModel::sample(std::mt19937_64& rng) const {
  // Size draw from the penalized distribution.
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  int I = params_.n_cap;
  double acc = 0.0;
  for (int k = 1; k <= params_.n_cap; ++k) {
    acc += std::exp(log_prior_size(k));
    if (u < acc) {
      I = k;
      break;
    }
  }
  BinaryPartition q = sample_uniform_partition(I, rng);
  std::vector<double> theta =
      I == 1 ? std::vector<double>{1.0}
             : sample_truncated_dirichlet(rng, I, params_.alpha, params_.tau(I));
  return PiecewiseDensity(std::move(q), std::move(theta));
}

std::vector<double> sample_dirichlet(std::mt19937_64& rng, std::span<const double> alpha) {
  std::vector<double> out(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> gamma(alpha[i], 1.0);
    out[i] = gamma(rng);
    sum += out[i];
  }
  if (sum <= 0.0) {
    // All gamma draws underflowed; retry recursively (vanishingly rare).
    return sample_dirichlet(rng, alpha);
  }
  for (double& x : out) x /= sum;
  return out;
}

std::vector<double> sample_dirichlet_symmetric(std::mt19937_64& rng, int I, double alpha) {
  std::vector<double> a(static_cast<std::size_t>(I), alpha);
  return sample_dirichlet(rng, a);
}

std::vector<double> sample_truncated_dirichlet(std::mt19937_64& rng,
                                               std::span<const double> alpha, double tau,
                                               long max_tries) {
  for (long t = 0; t < max_tries; ++t) {
    auto theta = sample_dirichlet(rng, alpha);
    if (*std::min_element(theta.begin(), theta.end()) > tau) return theta;
  }
  throw SamplingError("truncated Dirichlet rejection sampler failed after " +
                      std::to_string(max_tries) + " tries (I = " +
                      std::to_string(alpha.size()) + ", tau = " + std::to_string(tau) + ")");
}

std::vector<double> sample_truncated_dirichlet(std::mt19937_64& rng, int I, double alpha,
                                               double tau, long max_tries) {
  std::vector<double> a(static_cast<std::size_t>(I), alpha);
  return sample_truncated_dirichlet(rng, a, tau, max_tries);
}

double dirichlet_ball_mass_log_bound(int I, double alpha, double eps, double tau) {
  if (I < 1) throw std::invalid_argument("I must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(eps < 1.0 / static_cast<double>(I)))
    throw std::invalid_argument("bound requires eps < 1/I");
  if (!(tau < eps * eps)) throw std::invalid_argument("bound requires tau < eps^2");
  return std::lgamma(alpha * I) - I * std::lgamma(alpha) + I * std::log(eps * eps - tau);
}

double dirichlet_ball_mass_bound(int I, double alpha, double eps, double tau) {
  return std::exp(dirichlet_ball_mass_log_bound(I, alpha, eps, tau));
}

}  // namespace adapart
