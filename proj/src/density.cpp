#include "adapart/density.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "adapart/errors.hpp"
#include "adapart/rng.hpp"

namespace adapart {

PiecewiseDensity::PiecewiseDensity(BinaryPartition partition, std::vector<double> weights)
    : partition_(std::move(partition)), weights_(std::move(weights)) {
  if (static_cast<int>(weights_.size()) != partition_.size())
    throw std::invalid_argument("weight count does not match partition size");
  double sum = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || w > 1.0 + kWeightSumTolerance)
      throw std::invalid_argument("region weights must lie in [0,1]");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kWeightSumTolerance)
    throw std::invalid_argument("region weights must sum to 1 within 1e-12");
}

PiecewiseDensity PiecewiseDensity::uniform(int dim) {
  return PiecewiseDensity(BinaryPartition::unit_cube(dim), {1.0});
}

double PiecewiseDensity::height(int i) const {
  return std::ldexp(weights_[static_cast<std::size_t>(i)],
                    partition_.region(i).log2_volume());
}

double PiecewiseDensity::evaluate(std::span<const double> point) const {
  return height(partition_.locate(point));
}

void PiecewiseDensity::sample_into(std::mt19937_64& rng, std::span<double> point) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng);
  int region = size() - 1;
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) {
    acc += weights_[static_cast<std::size_t>(i)];
    if (u < acc) {
      region = i;
      break;
    }
  }
  const DyadicBox& box = partition_.region(region);
  for (int l = 0; l < dim(); ++l) {
    point[l] = box.lower(l) + unif(rng) * box.length(l);
  }
}

std::vector<std::vector<double>> PiecewiseDensity::sample(int count, std::uint64_t seed) const {
  if (count < 0) throw std::invalid_argument("sample count must be nonnegative");
  auto rng = make_rng(seed);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(count),
                                       std::vector<double>(static_cast<std::size_t>(dim())));
  for (auto& p : out) sample_into(rng, p);
  return out;
}

PiecewiseDensity PiecewiseDensity::refined_to(const BinaryPartition& finer) const {
  std::vector<double> w(static_cast<std::size_t>(finer.size()), 0.0);
  for (const auto& cell : intersection_cells(partition_, finer)) {
    const int coarse = cell.i;
    const int fine = cell.j;
    if (cell.box != finer.region(fine))
      throw std::invalid_argument("target partition does not refine the source partition");
    const int dlog = finer.region(fine).log2_volume() - partition_.region(coarse).log2_volume();
    w[static_cast<std::size_t>(fine)] = std::ldexp(mass(coarse), -dlog);
  }
  return PiecewiseDensity(finer, std::move(w));
}

std::string PiecewiseDensity::serialize() const {
  std::ostringstream os;
  os << partition_.serialize();
  os.precision(17);
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (i) os << ' ';
    os << weights_[i];
  }
  os << '\n';
  return os.str();
}

PiecewiseDensity PiecewiseDensity::deserialize(const std::string& text) {
  std::istringstream probe(text);
  int I = 0, dim = 0;
  if (!(probe >> I >> dim)) throw std::invalid_argument("malformed density record");
  BinaryPartition part = BinaryPartition::deserialize(text);
  // Skip past the partition block: 1 header line + I region lines.
  std::istringstream is(text);
  std::string line;
  for (int i = 0; i <= I; ++i) std::getline(is, line);
  std::vector<double> w(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    if (!(is >> w[static_cast<std::size_t>(i)]))
      throw std::invalid_argument("malformed density weight vector");
  }
  return PiecewiseDensity(std::move(part), std::move(w));
}

namespace {

void refine_recurse(const BinaryPartition& a, const BinaryPartition& b,
                    const DyadicBox& cur, std::vector<int>& ai, std::vector<int>& bi,
                    std::vector<IntersectionCell>& out) {
  if (ai.size() == 1 && bi.size() == 1) {
    out.push_back({ai.front(), bi.front(), cur});
    return;
  }
  // Some listed region is strictly finer than cur along some axis; split
  // there and distribute the index lists.
  int axis = -1;
  for (int l = 0; l < cur.dim() && axis < 0; ++l) {
    for (int i : ai) {
      if (a.region(i).coord(l).depth > cur.coord(l).depth) {
        axis = l;
        break;
      }
    }
    for (int j : bi) {
      if (axis >= 0) break;
      if (b.region(j).coord(l).depth > cur.coord(l).depth) {
        axis = l;
        break;
      }
    }
  }
  if (axis < 0) throw std::logic_error("inconsistent partitions in refinement");
  auto halves = cur.split(axis);
  for (const DyadicBox& half : {halves.first, halves.second}) {
    std::vector<int> an, bn;
    for (int i : ai)
      if (intersect(a.region(i), half)) an.push_back(i);
    for (int j : bi)
      if (intersect(b.region(j), half)) bn.push_back(j);
    refine_recurse(a, b, half, an, bn, out);
  }
}

}  // namespace

std::vector<IntersectionCell> intersection_cells(const BinaryPartition& a,
                                                 const BinaryPartition& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<int> ai(static_cast<std::size_t>(a.size()));
  std::vector<int> bi(static_cast<std::size_t>(b.size()));
  std::iota(ai.begin(), ai.end(), 0);
  std::iota(bi.begin(), bi.end(), 0);
  std::vector<IntersectionCell> out;
  refine_recurse(a, b, DyadicBox(a.dim()), ai, bi, out);
  return out;
}

BinaryPartition common_refinement(const BinaryPartition& a, const BinaryPartition& b) {
  std::vector<DyadicBox> boxes;
  for (auto& cell : intersection_cells(a, b)) boxes.push_back(cell.box);
  return BinaryPartition::from_boxes(std::move(boxes));
}

double hellinger_exact(const PiecewiseDensity& f, const PiecewiseDensity& g) {
  double sum = 0.0;
  for (const auto& cell : intersection_cells(f.partition(), g.partition())) {
    const double d = std::sqrt(f.height(cell.i)) - std::sqrt(g.height(cell.j));
    sum += d * d * cell.box.volume();
  }
  return std::sqrt(std::clamp(sum, 0.0, 2.0));
}

namespace {

std::string describe_cell(const DyadicBox& box) {
  std::ostringstream os;
  for (int l = 0; l < box.dim(); ++l) {
    if (l) os << " x ";
    os << '[' << box.lower(l) << ',' << box.upper(l) << ')';
  }
  return os.str();
}

}  // namespace

double kl_exact(const PiecewiseDensity& f, const PiecewiseDensity& g) {
  double sum = 0.0;
  for (const auto& cell : intersection_cells(f.partition(), g.partition())) {
    const double bf = f.height(cell.i);
    if (bf <= 0.0) continue;
    const double bg = g.height(cell.j);
    if (bg <= 0.0)
      throw DivergenceError("KL divergence undefined: second density vanishes on cell " +
                            describe_cell(cell.box) + " carrying mass of the first");
    sum += bf * cell.box.volume() * std::log(bf / bg);
  }
  return (sum < 0.0 && sum > -1e-12) ? 0.0 : sum;
}

double logratio_variance(const PiecewiseDensity& f, const PiecewiseDensity& g) {
  double e1 = 0.0, e2 = 0.0;
  for (const auto& cell : intersection_cells(f.partition(), g.partition())) {
    const double bf = f.height(cell.i);
    if (bf <= 0.0) continue;
    const double bg = g.height(cell.j);
    if (bg <= 0.0)
      throw DivergenceError("log-ratio variance undefined: second density vanishes on cell " +
                            describe_cell(cell.box) + " carrying mass of the first");
    const double x = std::log(bf / bg);
    const double m = bf * cell.box.volume();
    e1 += m * x;
    e2 += m * x * x;
  }
  return std::max(0.0, e2 - e1 * e1);
}

double l1_exact(const PiecewiseDensity& f, const PiecewiseDensity& g) {
  double sum = 0.0;
  for (const auto& cell : intersection_cells(f.partition(), g.partition())) {
    sum += std::abs(f.height(cell.i) - g.height(cell.j)) * cell.box.volume();
  }
  return sum;
}

std::vector<std::vector<double>> TruthDensity::sample(int count, std::uint64_t seed) const {
  auto rng = make_rng(seed);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(count),
                                       std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& p : out) sampler(rng, p);
  return out;
}

McEstimate hellinger_mc(const TruthDensity& f0, const PiecewiseDensity& g,
                        long n_mc, std::uint64_t seed) {
  if (n_mc < 1) throw std::invalid_argument("n_mc must be positive");
  auto rng = make_rng(seed);
  std::vector<double> y(static_cast<std::size_t>(f0.dim));
  double sum = 0.0, sum_sq = 0.0;
  for (long k = 0; k < n_mc; ++k) {
    f0.sampler(rng, y);
    const double fy = f0.pdf(y);
    const double w = fy > 0.0 ? std::sqrt(g.evaluate(y) / fy) : 0.0;
    sum += w;
    sum_sq += w * w;
  }
  const double m = sum / static_cast<double>(n_mc);
  const double var = std::max(0.0, sum_sq / static_cast<double>(n_mc) - m * m);
  const double se_m = std::sqrt(var / static_cast<double>(n_mc));
  const double rho_sq = 2.0 - 2.0 * m;
  const double se_rho_sq = 2.0 * se_m;
  const double rho = std::sqrt(std::clamp(rho_sq, 0.0, 2.0));
  const double se = rho > 1e-8 ? se_rho_sq / (2.0 * rho) : std::sqrt(se_rho_sq);
  return {rho, se};
}

double integrate_1d(const std::function<double(double)>& f, double a, double b, double tol) {
  struct Simpson {
    const std::function<double(double)>& f;
    double run(double a, double fa, double b, double fb, double fm, double whole,
               double tol, int depth) const {
      const double m = 0.5 * (a + b);
      const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
      const double flm = f(lm), frm = f(rm);
      const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
      const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
      if (depth > 40 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
      return run(a, fa, m, fm, flm, left, tol / 2.0, depth + 1) +
             run(m, fm, b, fb, frm, right, tol / 2.0, depth + 1);
    }
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return Simpson{f}.run(a, fa, b, fb, fm, whole, tol, 0);
}

double hellinger_to_truth(const TruthDensity& f0, const PiecewiseDensity& g,
                          long n_mc_fallback, std::uint64_t seed) {
  if (f0.piecewise) return hellinger_exact(*f0.piecewise, g);
  if (f0.dim == 1) {
    double cross = 0.0;
    for (int i = 0; i < g.size(); ++i) {
      const double beta = g.height(i);
      if (beta <= 0.0) continue;
      const DyadicBox& box = g.partition().region(i);
      cross += std::sqrt(beta) *
               integrate_1d([&](double y) { return std::sqrt(f0.pdf(std::span(&y, 1))); },
                            box.lower(0), box.upper(0), 1e-11);
    }
    return std::sqrt(std::clamp(2.0 - 2.0 * cross, 0.0, 2.0));
  }
  return hellinger_mc(f0, g, n_mc_fallback, seed).estimate;
}

}  // namespace adapart
