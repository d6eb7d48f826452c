#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adapart/density.hpp"

namespace adapart {

/// Ground-truth density families with known approximation exponents.
struct TruthSpec {
  enum class Family { piecewise, holder_1d, bounded_variation_1d, haar_sparse };

  Family family = Family::holder_1d;

  // piecewise
  std::optional<PiecewiseDensity> piecewise;

  // holder_1d: f(y) = 1 + L * sgn(y - 1/2) * |y - 1/2|^beta, which
  // integrates to 1 exactly; positivity needs L * (1/2)^beta < 1 for
  // beta < 1 and L < 2 for beta = 1.
  double holder_beta = 1.0;
  double holder_L = 1.0;

  // bounded_variation_1d: piecewise-linear density with non-dyadic knots,
  // normalized at construction.
  std::vector<double> bv_knots{0.0, 0.3, 0.7, 1.0};
  std::vector<double> bv_values{0.6, 1.6, 0.6, 1.4};

  // haar_sparse: finite Haar expansion over `haar_levels` scales with
  // coefficient magnitudes scale * 2^{-j (decay + 1/2)} and seed-driven
  // signs; a positive floor is ensured by construction.
  int haar_levels = 4;
  double haar_decay = 1.0;
  double haar_scale = 0.5;

  std::optional<double> nominal_r;  // default: family-specific
};

TruthDensity make_truth(const TruthSpec& spec, std::uint64_t seed);

/// Minimum Hellinger distance from a 1D truth to a piecewise density on a
/// size-I dyadic partition with mass-matching weights, by dynamic
/// programming over dyadic trees. depth_cap < 0 picks an automatic cap.
double best_approximation_error(const TruthDensity& truth, int I, int depth_cap = -1);

}  // namespace adapart
