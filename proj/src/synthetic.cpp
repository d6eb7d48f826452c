#include "adapart/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "adapart/errors.hpp"
#include "adapart/rng.hpp"

namespace adapart {

namespace {

// Numeric inverse of a strictly increasing CDF on [0,1]: bisection with a
// Newton polish.
double invert_cdf(const std::function<double(double)>& cdf,
                  const std::function<double(double)>& pdf, double u) {
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < u ? lo : hi) = mid;
  }
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 4; ++it) {
    const double d = pdf(y);
    if (d <= 0.0) break;
    y = std::clamp(y - (cdf(y) - u) / d, lo, hi);
  }
  return y;
}

TruthDensity make_1d_truth(std::function<double(double)> pdf1,
                           std::function<double(double)> cdf1, double nominal_r) {
  TruthDensity out;
  out.dim = 1;
  out.nominal_r = nominal_r;
  out.pdf = [pdf1](std::span<const double> y) { return pdf1(y[0]); };
  out.cdf = cdf1;
  out.sampler = [pdf1, cdf1](std::mt19937_64& rng, std::span<double> y) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    y[0] = invert_cdf(cdf1, pdf1, unif(rng));
  };
  const double total = integrate_1d(pdf1, 0.0, 1.0, 1e-10);
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("truth density does not integrate to 1 (got " +
                                std::to_string(total) + ")");
  return out;
}

TruthDensity make_holder(const TruthSpec& spec) {
  const double beta = spec.holder_beta;
  const double L = spec.holder_L;
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("holder_1d requires beta in (0,1]");
  if (!(L > 0.0) || L * std::pow(0.5, beta) >= 1.0)
    throw std::invalid_argument("holder_1d requires L > 0 with L * (1/2)^beta < 1");
  auto pdf1 = [beta, L](double y) {
    const double t = y - 0.5;
    return 1.0 + L * (t >= 0.0 ? 1.0 : -1.0) * std::pow(std::abs(t), beta);
  };
  // The signed-power perturbation is odd around 1/2, so the CDF has the
  // closed form below and the density integrates to 1 exactly.
  auto cdf1 = [beta, L](double y) {
    const double b1 = beta + 1.0;
    const double half_pow = std::pow(0.5, b1);
    double g;
    if (y <= 0.5) {
      g = -(half_pow - std::pow(0.5 - y, b1)) / b1;
    } else {
      g = (-half_pow + std::pow(y - 0.5, b1)) / b1;
    }
    return std::clamp(y + L * g, 0.0, 1.0);
  };
  return make_1d_truth(pdf1, cdf1, spec.nominal_r.value_or(beta));
}

TruthDensity make_bounded_variation(const TruthSpec& spec) {
  const auto& knots = spec.bv_knots;
  const auto& raw = spec.bv_values;
  if (knots.size() < 2 || knots.size() != raw.size())
    throw std::invalid_argument("bounded_variation_1d needs matching knots and values");
  if (knots.front() != 0.0 || knots.back() != 1.0 ||
      !std::is_sorted(knots.begin(), knots.end()))
    throw std::invalid_argument("bounded_variation_1d knots must increase from 0 to 1");
  for (double v : raw)
    if (!(v > 0.0)) throw std::invalid_argument("bounded_variation_1d values must be positive");
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < knots.size(); ++s)
    total += (knots[s + 1] - knots[s]) * 0.5 * (raw[s] + raw[s + 1]);
  std::vector<double> values(raw.size());
  for (std::size_t s = 0; s < raw.size(); ++s) values[s] = raw[s] / total;
  auto pdf1 = [knots, values](double y) {
    auto hi = std::upper_bound(knots.begin(), knots.end(), y);
    std::size_t s = hi == knots.begin() ? 0 : static_cast<std::size_t>(hi - knots.begin()) - 1;
    s = std::min(s, knots.size() - 2);
    const double t = (y - knots[s]) / (knots[s + 1] - knots[s]);
    return values[s] + t * (values[s + 1] - values[s]);
  };
  // Piecewise-quadratic CDF assembled segment by segment.
  std::vector<double> cum(knots.size(), 0.0);
  for (std::size_t s = 0; s + 1 < knots.size(); ++s)
    cum[s + 1] = cum[s] + (knots[s + 1] - knots[s]) * 0.5 * (values[s] + values[s + 1]);
  auto cdf1 = [knots, values, cum](double y) {
    auto hi = std::upper_bound(knots.begin(), knots.end(), y);
    std::size_t s = hi == knots.begin() ? 0 : static_cast<std::size_t>(hi - knots.begin()) - 1;
    s = std::min(s, knots.size() - 2);
    const double w = knots[s + 1] - knots[s];
    const double t = (y - knots[s]) / w;
    const double fy = values[s] + t * (values[s + 1] - values[s]);
    return std::clamp(cum[s] + w * t * 0.5 * (values[s] + fy), 0.0, 1.0);
  };
  return make_1d_truth(pdf1, cdf1, spec.nominal_r.value_or(1.0));
}

TruthDensity make_piecewise_truth(PiecewiseDensity dens, double nominal_r) {
  TruthDensity out;
  out.dim = dens.dim();
  out.nominal_r = nominal_r;
  auto shared = std::make_shared<PiecewiseDensity>(std::move(dens));
  out.pdf = [shared](std::span<const double> y) { return shared->evaluate(y); };
  out.sampler = [shared](std::mt19937_64& rng, std::span<double> y) {
    shared->sample_into(rng, y);
  };
  if (shared->dim() == 1) {
    out.cdf = [shared](double y) {
      double acc = 0.0;
      for (int i = 0; i < shared->size(); ++i) {
        const DyadicBox& box = shared->partition().region(i);
        if (y >= box.upper(0)) {
          acc += shared->mass(i);
        } else if (y > box.lower(0)) {
          acc += shared->mass(i) * (y - box.lower(0)) / box.length(0);
        }
      }
      return acc;
    };
  }
  out.piecewise = *shared;
  return out;
}

TruthDensity make_haar(const TruthSpec& spec, std::uint64_t seed) {
  if (spec.haar_levels < 1 || spec.haar_levels > 12)
    throw std::invalid_argument("haar_sparse needs 1 <= levels <= 12");
  if (!(spec.haar_decay > 0.0) || !(spec.haar_scale > 0.0))
    throw std::invalid_argument("haar_sparse needs positive decay and scale");
  const int J = spec.haar_levels;
  const int cells = 1 << J;
  std::vector<double> f(static_cast<std::size_t>(cells), 1.0);
  auto rng = make_rng(derive_seed(seed, 0x44aa22));
  std::uniform_int_distribution<int> coin(0, 1);
  for (int j = 0; j < J; ++j) {
    const double mag = spec.haar_scale * std::pow(2.0, -j * (spec.haar_decay + 0.5));
    const double amp = mag * std::pow(2.0, 0.5 * j);  // psi_{j,k} height
    for (int k = 0; k < (1 << j); ++k) {
      const double c = coin(rng) ? amp : -amp;
      const int span = cells >> j;
      const int start = k * span;
      for (int t = 0; t < span / 2; ++t) f[static_cast<std::size_t>(start + t)] += c;
      for (int t = span / 2; t < span; ++t) f[static_cast<std::size_t>(start + t)] -= c;
    }
  }
  // Positive floor, then renormalize. The expansion integrates to 1 before
  // the shift, so the normalizer is 1 + shift.
  const double floor_value = 0.05;
  const double min_f = *std::min_element(f.begin(), f.end());
  const double shift = min_f < floor_value ? floor_value - min_f : 0.0;
  std::vector<double> theta(f.size());
  const double cell_width = 1.0 / cells;
  for (std::size_t i = 0; i < f.size(); ++i)
    theta[i] = (f[i] + shift) / (1.0 + shift) * cell_width;
  double sum = 0.0;
  for (double t : theta) sum += t;
  for (double& t : theta) t /= sum;  // absorb rounding
  std::vector<DyadicBox> boxes;
  for (int k = 0; k < cells; ++k)
    boxes.push_back(DyadicBox({{static_cast<std::uint32_t>(J), static_cast<std::uint64_t>(k)}}));
  PiecewiseDensity dens(BinaryPartition::from_boxes(std::move(boxes)), std::move(theta));
  return make_piecewise_truth(std::move(dens), spec.nominal_r.value_or(spec.haar_decay));
}

}  // namespace

TruthDensity make_truth(const TruthSpec& spec, std::uint64_t seed) {
  switch (spec.family) {
    case TruthSpec::Family::piecewise:
      if (!spec.piecewise)
        throw std::invalid_argument("piecewise family needs a stored density");
      return make_piecewise_truth(*spec.piecewise, spec.nominal_r.value_or(1.0));
    case TruthSpec::Family::holder_1d:
      return make_holder(spec);
    case TruthSpec::Family::bounded_variation_1d:
      return make_bounded_variation(spec);
    case TruthSpec::Family::haar_sparse:
      return make_haar(spec, seed);
  }
  throw std::invalid_argument("unknown truth family");
}

double best_approximation_error(const TruthDensity& truth, int I, int depth_cap) {
  if (truth.dim != 1)
    throw std::invalid_argument("best_approximation_error supports 1D truths only");
  if (I < 1 || I > 256) throw std::invalid_argument("I out of supported range [1,256]");
  int cap = depth_cap;
  if (cap < 0) {
    cap = static_cast<int>(std::ceil(std::log2(std::max(I, 2)))) + 6;
    if (truth.piecewise) {
      int truth_depth = 0;
      for (const auto& r : truth.piecewise->partition().regions())
        truth_depth = std::max(truth_depth, static_cast<int>(r.coord(0).depth));
      cap = std::max(cap, truth_depth + 2);
    }
    cap = std::min(cap, 18);
  }
  if (cap > 24) throw ResourceError("depth cap too deep for the tree DP");
  const int cells = 1 << cap;

  // Per-cell truth mass and integral of sqrt(f) at the finest level.
  std::vector<double> mass(static_cast<std::size_t>(cells));
  std::vector<double> root(static_cast<std::size_t>(cells));
  const double w = 1.0 / cells;
  for (int k = 0; k < cells; ++k) {
    const double a = k * w, b = (k + 1) * w;
    if (truth.piecewise) {
      const double mid = 0.5 * (a + b);
      const double val = truth.pdf(std::span(&mid, 1));
      mass[static_cast<std::size_t>(k)] = val * w;
      root[static_cast<std::size_t>(k)] = std::sqrt(val) * w;
    } else {
      mass[static_cast<std::size_t>(k)] =
          integrate_1d([&](double y) { return truth.pdf(std::span(&y, 1)); }, a, b, 1e-12);
      root[static_cast<std::size_t>(k)] =
          integrate_1d([&](double y) { return std::sqrt(truth.pdf(std::span(&y, 1))); }, a, b,
                       1e-12);
    }
  }

  // Bottom-up DP over dyadic trees. score[k][j-1] is the best achievable
  // sum of sqrt(mass_i / width_i) * int sqrt(f) over a j-cell partition of
  // interval k at the current depth; the Hellinger distance with
  // mass-matching weights is sqrt(2 - 2 * score).
  auto leaf_score = [](double m, double s, double width) {
    return m > 0.0 ? std::sqrt(m / width) * s : 0.0;
  };
  std::vector<std::vector<double>> score(static_cast<std::size_t>(cells));
  for (int k = 0; k < cells; ++k)
    score[static_cast<std::size_t>(k)] = {
        leaf_score(mass[static_cast<std::size_t>(k)], root[static_cast<std::size_t>(k)], w)};
  std::vector<double> level_mass = mass, level_root = root;
  double width = w;
  for (int d = cap - 1; d >= 0; --d) {
    const int count = 1 << d;
    width *= 2.0;
    std::vector<std::vector<double>> up(static_cast<std::size_t>(count));
    std::vector<double> up_mass(static_cast<std::size_t>(count));
    std::vector<double> up_root(static_cast<std::size_t>(count));
    const int max_pieces = std::min(I, cells >> d);
    for (int k = 0; k < count; ++k) {
      const auto& left = score[static_cast<std::size_t>(2 * k)];
      const auto& right = score[static_cast<std::size_t>(2 * k + 1)];
      up_mass[static_cast<std::size_t>(k)] =
          level_mass[static_cast<std::size_t>(2 * k)] + level_mass[static_cast<std::size_t>(2 * k + 1)];
      up_root[static_cast<std::size_t>(k)] =
          level_root[static_cast<std::size_t>(2 * k)] + level_root[static_cast<std::size_t>(2 * k + 1)];
      std::vector<double> best(static_cast<std::size_t>(max_pieces),
                               -std::numeric_limits<double>::infinity());
      best[0] = leaf_score(up_mass[static_cast<std::size_t>(k)],
                           up_root[static_cast<std::size_t>(k)], width);
      for (int j = 2; j <= max_pieces; ++j) {
        double b = -std::numeric_limits<double>::infinity();
        for (int j1 = 1; j1 < j; ++j1) {
          const int j2 = j - j1;
          if (j1 > static_cast<int>(left.size()) || j2 > static_cast<int>(right.size())) continue;
          b = std::max(b, left[static_cast<std::size_t>(j1 - 1)] +
                              right[static_cast<std::size_t>(j2 - 1)]);
        }
        best[static_cast<std::size_t>(j - 1)] = b;
      }
      up[static_cast<std::size_t>(k)] = std::move(best);
    }
    score = std::move(up);
    level_mass = std::move(up_mass);
    level_root = std::move(up_root);
  }
  const int pieces = std::min(I, cells);
  const double cross = score[0][static_cast<std::size_t>(pieces - 1)];
  return std::sqrt(std::clamp(2.0 - 2.0 * cross, 0.0, 2.0));
}

}  // namespace adapart
