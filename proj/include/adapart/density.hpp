#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adapart/dyadic.hpp"

namespace adapart {

inline constexpr double kWeightSumTolerance = 1e-12;

/// Piecewise-constant density on a binary partition: region i carries
/// probability mass theta_i, so the density value there is
/// theta_i / volume(region i).
class PiecewiseDensity {
 public:
  PiecewiseDensity(BinaryPartition partition, std::vector<double> weights);

  static PiecewiseDensity uniform(int dim);

  const BinaryPartition& partition() const { return partition_; }
  const std::vector<double>& weights() const { return weights_; }
  int dim() const { return partition_.dim(); }
  int size() const { return partition_.size(); }

  double mass(int i) const { return weights_[static_cast<std::size_t>(i)]; }
  /// Density value beta_i on region i.
  double height(int i) const;

  double evaluate(std::span<const double> point) const;

  std::vector<std::vector<double>> sample(int count, std::uint64_t seed) const;
  void sample_into(std::mt19937_64& rng, std::span<double> point) const;

  /// Re-expresses the same function on a refinement of its partition.
  PiecewiseDensity refined_to(const BinaryPartition& finer) const;

  std::string serialize() const;
  static PiecewiseDensity deserialize(const std::string& text);

 private:
  BinaryPartition partition_;
  std::vector<double> weights_;
};

struct IntersectionCell {
  int i;  // region index in the first partition
  int j;  // region index in the second partition
  DyadicBox box;
};

/// Cells of the common refinement with their parent indices in each input.
/// Only cells of positive volume are produced; found by recursive joint
/// subdivision rather than an all-pairs scan.
std::vector<IntersectionCell> intersection_cells(const BinaryPartition& a,
                                                 const BinaryPartition& b);

/// Smallest common refinement of two binary partitions (itself a binary
/// partition).
BinaryPartition common_refinement(const BinaryPartition& a, const BinaryPartition& b);

/// Exact Hellinger distance between two piecewise densities; in [0, sqrt(2)].
double hellinger_exact(const PiecewiseDensity& f, const PiecewiseDensity& g);

/// Exact KL divergence K(f, g). Throws DivergenceError, naming the cell,
/// when g vanishes on a cell carrying f-mass.
double kl_exact(const PiecewiseDensity& f, const PiecewiseDensity& g);

/// Variance under f of log(f/g); same support requirement as kl_exact.
double logratio_variance(const PiecewiseDensity& f, const PiecewiseDensity& g);

/// Exact L1 distance; satisfies hellinger^2 <= L1 <= 2.
double l1_exact(const PiecewiseDensity& f, const PiecewiseDensity& g);

/// Evaluable density on [0,1]^p with an exact sampler, used as simulation
/// ground truth. When the truth happens to be piecewise constant the exact
/// representation is carried along so metrics against it stay exact.
struct TruthDensity {
  int dim = 1;
  std::function<double(std::span<const double>)> pdf;
  std::function<void(std::mt19937_64&, std::span<double>)> sampler;
  std::function<double(double)> cdf;  // 1D families only, may be empty
  std::optional<PiecewiseDensity> piecewise;
  double nominal_r = 1.0;

  std::vector<std::vector<double>> sample(int count, std::uint64_t seed) const;
};

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo Hellinger distance via rho^2 = 2 - 2 E_f0[ sqrt(g/f0) ],
/// sampling from the truth.
McEstimate hellinger_mc(const TruthDensity& f0, const PiecewiseDensity& g,
                        long n_mc, std::uint64_t seed);

/// Hellinger distance from a truth to a piecewise density by the most
///// accurate available route: exact when the truth is piecewise, cell-wise
/// quadrature in 1D, Monte Carlo otherwise.
double hellinger_to_truth(const TruthDensity& f0, const PiecewiseDensity& g,
                          long n_mc_fallback = 200000, std::uint64_t seed = 7);

/// Adaptive Simpson quadrature on [a, b].
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    double tol = 1e-10);

}  // namespace adapart
