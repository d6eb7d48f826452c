#include "adapart/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "adapart/errors.hpp"
#include "adapart/rng.hpp"

namespace adapart {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

}  // namespace

Dataset::Dataset(int dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ < 1) throw std::invalid_argument("dimension must be positive");
  if (coords_.size() % static_cast<std::size_t>(dim_) != 0)
    throw std::invalid_argument("coordinate buffer length is not a multiple of the dimension");
  for (double y : coords_) {
    if (!(y >= 0.0 && y <= 1.0))
      throw std::invalid_argument("data coordinates must lie in [0,1]");
  }
}

Dataset Dataset::from_points(const std::vector<std::vector<double>>& points) {
  if (points.empty()) throw std::invalid_argument("dataset needs at least one point");
  const int dim = static_cast<int>(points.front().size());
  std::vector<double> coords;
  coords.reserve(points.size() * static_cast<std::size_t>(dim));
  for (const auto& p : points) {
    if (static_cast<int>(p.size()) != dim)
      throw std::invalid_argument("ragged point list");
    coords.insert(coords.end(), p.begin(), p.end());
  }
  return Dataset(dim, std::move(coords));
}

std::vector<long> region_counts(const Dataset& data, const BinaryPartition& q) {
  std::vector<long> counts(static_cast<std::size_t>(q.size()), 0);
  for (long j = 0; j < data.n(); ++j) ++counts[static_cast<std::size_t>(q.locate(data.point(j)))];
  return counts;
}

double log_likelihood(const Dataset& data, const PiecewiseDensity& f) {
  const auto counts = region_counts(data, f.partition());
  double sum = 0.0;
  for (int i = 0; i < f.size(); ++i) {
    const long n_i = counts[static_cast<std::size_t>(i)];
    if (n_i == 0) continue;
    const double beta = f.height(i);
    if (beta <= 0.0) return kNegInf;
    sum += static_cast<double>(n_i) * std::log(beta);
  }
  return sum;
}

PiecewiseDensity mle_fixed_partition(const Dataset& data, const BinaryPartition& q) {
  if (data.n() < 1) throw std::invalid_argument("inference needs at least one observation");
  const auto counts = region_counts(data, q);
  std::vector<double> theta(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    theta[i] = static_cast<double>(counts[i]) / static_cast<double>(data.n());
  return PiecewiseDensity(q, std::move(theta));
}

namespace {

// Log-likelihood of the MLE on q, up to the additive constant
// sum_i N_i log(N_i / n): computed directly from counts and volumes.
double mle_log_likelihood(const std::vector<long>& counts, const BinaryPartition& q, long n) {
  double sum = 0.0;
  for (int i = 0; i < q.size(); ++i) {
    const double n_i = static_cast<double>(counts[static_cast<std::size_t>(i)]);
    if (n_i == 0) continue;
    sum += n_i * (std::log(n_i / static_cast<double>(n)) +
                  q.region(i).log2_volume() * std::numbers::ln2);
  }
  return sum;
}

PiecewiseDensity sieve_mle_exhaustive(const Dataset& data, int I, std::uint64_t enum_cap) {
  const auto all = enumerate_partitions(I, data.dim(), enum_cap);
  double best = kNegInf;
  const BinaryPartition* arg = nullptr;
  for (const auto& q : all) {
    const double ll = mle_log_likelihood(region_counts(data, q), q, data.n());
    if (ll > best + 1e-12 || arg == nullptr) {
      best = ll;
      arg = &q;
    }
  }
  return mle_fixed_partition(data, *arg);
}

PiecewiseDensity sieve_mle_greedy(const Dataset& data, int I) {
  struct Node {
    DyadicBox box;
    std::vector<long> members;
  };
  std::vector<Node> nodes;
  {
    Node root{DyadicBox(data.dim()), {}};
    root.members.resize(static_cast<std::size_t>(data.n()));
    std::iota(root.members.begin(), root.members.end(), 0L);
    nodes.push_back(std::move(root));
  }
  auto low_child_count = [&](const Node& node, int axis) {
    const auto& c = node.box.coord(axis);
    long k = 0;
    for (long j : node.members) {
      const double y = data.point(j)[axis];
      std::uint64_t cell =
          static_cast<std::uint64_t>(std::floor(std::ldexp(y, static_cast<int>(c.depth) + 1)));
      const std::uint64_t last = (std::uint64_t{2} << c.depth) - 1;
      if (cell > last) cell = last;
      if (cell == c.index * 2) ++k;
    }
    return k;
  };
  auto split_gain = [&](long k, long total) {
    if (total == 0) return 0.0;
    const double n_d = static_cast<double>(total);
    return xlogx(static_cast<double>(k)) + xlogx(static_cast<double>(total - k)) -
           xlogx(n_d) + n_d * std::numbers::ln2;
  };
  while (static_cast<int>(nodes.size()) < I) {
    // Canonical order fixes the tie-break: lowest region index, then axis.
    std::sort(nodes.begin(), nodes.end(),
              [](const Node& a, const Node& b) { return a.box < b.box; });
    double best_gain = kNegInf;
    int best_region = -1, best_axis = -1;
    long best_k = 0;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      for (int l = 0; l < data.dim(); ++l) {
        if (nodes[static_cast<std::size_t>(i)].box.coord(l).depth >= kMaxDepth) continue;
        const long k = low_child_count(nodes[static_cast<std::size_t>(i)], l);
        const double gain =
            split_gain(k, static_cast<long>(nodes[static_cast<std::size_t>(i)].members.size()));
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_region = i;
          best_axis = l;
          best_k = k;
        }
      }
    }
    if (best_region < 0) throw ResourceError("no admissible split left in greedy sieve search");
    Node& node = nodes[static_cast<std::size_t>(best_region)];
    auto halves = node.box.split(best_axis);
    Node lo{std::move(halves.first), {}};
    Node hi{std::move(halves.second), {}};
    lo.members.reserve(static_cast<std::size_t>(best_k));
    hi.members.reserve(node.members.size() - static_cast<std::size_t>(best_k));
    const auto& c = node.box.coord(best_axis);
    for (long j : node.members) {
      const double y = data.point(j)[best_axis];
      std::uint64_t cell =
          static_cast<std::uint64_t>(std::floor(std::ldexp(y, static_cast<int>(c.depth) + 1)));
      const std::uint64_t last = (std::uint64_t{2} << c.depth) - 1;
      if (cell > last) cell = last;
      (cell == c.index * 2 ? lo : hi).members.push_back(j);
    }
    nodes[static_cast<std::size_t>(best_region)] = std::move(lo);
    nodes.push_back(std::move(hi));
  }
  std::vector<DyadicBox> boxes;
  std::vector<std::pair<DyadicBox, double>> with_mass;
  for (const auto& node : nodes)
    with_mass.emplace_back(node.box,
                           static_cast<double>(node.members.size()) /
                               static_cast<double>(data.n()));
  std::sort(with_mass.begin(), with_mass.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<double> theta;
  for (auto& [box, mass] : with_mass) {
    boxes.push_back(std::move(box));
    theta.push_back(mass);
  }
  return PiecewiseDensity(BinaryPartition::from_boxes(std::move(boxes)), std::move(theta));
}

}  // namespace

PiecewiseDensity sieve_mle(const Dataset& data, int I, SieveStrategy strategy,
                           std::uint64_t enum_cap) {
  if (data.n() < 1) throw std::invalid_argument("inference needs at least one observation");
  if (I < 1) throw std::invalid_argument("partition size must be positive");
  if (strategy == SieveStrategy::exhaustive) return sieve_mle_exhaustive(data, I, enum_cap);
  return sieve_mle_greedy(data, I);
}

double log_marginal_from_counts(std::span<const long> counts, const BinaryPartition& q,
                                double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const int I = q.size();
  long n = 0;
  for (long c : counts) n += c;
  double sum = std::lgamma(alpha * I) - std::lgamma(alpha * I + static_cast<double>(n));
  for (int i = 0; i < I; ++i) {
    const double n_i = static_cast<double>(counts[static_cast<std::size_t>(i)]);
    sum += std::lgamma(alpha + n_i) - std::lgamma(alpha);
    sum += n_i * q.region(i).log2_volume() * std::numbers::ln2;
  }
  return sum;
}

double log_marginal_likelihood(const Dataset& data, const BinaryPartition& q, double alpha) {
  const auto counts = region_counts(data, q);
  return log_marginal_from_counts(counts, q, alpha);
}

std::map<int, double> PosteriorSummary::size_distribution() const {
  std::map<int, double> out;
  for (const auto& e : entries) out[e.partition.size()] += e.weight;
  return out;
}

namespace {

void finalize_summary(PosteriorSummary& summary) {
  double max_lw = kNegInf;
  for (const auto& e : summary.entries) max_lw = std::max(max_lw, e.log_weight);
  double z = 0.0;
  for (const auto& e : summary.entries) z += std::exp(e.log_weight - max_lw);
  for (auto& e : summary.entries) e.weight = std::exp(e.log_weight - max_lw) / z;
  summary.normalized = true;
  std::map<int, double> by_size;
  for (const auto& e : summary.entries) by_size[e.partition.size()] += e.weight;
  double best = -1.0;
  for (const auto& [size, w] : by_size) {
    if (w > best) {
      best = w;
      summary.mode_size = size;
    }
  }
}

}  // namespace

PosteriorSummary exact_posterior(const Dataset& data, const PriorModel& prior, int I_max,
                                 std::uint64_t enum_cap) {
  if (data.n() < 1) throw std::invalid_argument("inference needs at least one observation");
  if (I_max < 1) throw std::invalid_argument("I_max must be positive");
  PosteriorSummary summary;
  summary.alpha = prior.params().alpha;
  summary.n = data.n();
  for (int I = 1; I <= std::min(I_max, prior.params().n_cap); ++I) {
    for (auto& q : enumerate_partitions(I, data.dim(), enum_cap)) {
      PosteriorEntry entry;
      entry.counts = region_counts(data, q);
      entry.log_weight = prior.log_prior_partition(q) +
                         log_marginal_from_counts(entry.counts, q, prior.params().alpha);
      entry.dirichlet_post.resize(entry.counts.size());
      for (std::size_t i = 0; i < entry.counts.size(); ++i)
        entry.dirichlet_post[i] = prior.params().alpha + static_cast<double>(entry.counts[i]);
      entry.partition = std::move(q);
      summary.entries.push_back(std::move(entry));
    }
  }
  finalize_summary(summary);
  return summary;
}

// ---------------------------------------------------------------------------
// Collapsed Metropolis-Hastings over partition space.

namespace {

struct ChainRegion {
  DyadicBox box;
  std::vector<long> members;
  double term = 0.0;  // lgamma(alpha + N) - lgamma(alpha) + N * S * ln 2
};

class Chain {
 public:
  Chain(const Dataset& data, const PriorModel& prior, const McmcOptions& options)
      : data_(data), prior_(prior), options_(options) {
    BinaryPartition init = options.init.value_or(BinaryPartition::unit_cube(data.dim()));
    for (const auto& box : init.regions()) regions_.push_back({box, {}, 0.0});
    for (long j = 0; j < data.n(); ++j) {
      for (auto& r : regions_) {
        if (r.box.contains(data.point(j))) {
          r.members.push_back(j);
          break;
        }
      }
    }
    for (auto& r : regions_) r.term = region_term(r);
    sum_terms_ = 0.0;
    for (const auto& r : regions_) sum_terms_ += r.term;
  }

  int size() const { return static_cast<int>(regions_.size()); }

  double region_term(const ChainRegion& r) const {
    if (options_.prior_only) return 0.0;
    const double alpha = prior_.params().alpha;
    const double n_i = static_cast<double>(r.members.size());
    return std::lgamma(alpha + n_i) - std::lgamma(alpha) +
           n_i * r.box.log2_volume() * std::numbers::ln2;
  }

  double size_term(int I) const {
    if (options_.prior_only) return 0.0;
    const double alpha = prior_.params().alpha;
    return std::lgamma(alpha * I) - std::lgamma(alpha * I + static_cast<double>(data_.n()));
  }

  // log target up to a constant: prior size x 1/T_I x collapsed marginal.
  double log_target_size_part(int I) const {
    return prior_.log_prior_size(I) - prior_.counts().log_count(I) + size_term(I);
  }

  static std::string sibling_key(const DyadicBox& box, int axis) {
    std::vector<DyadicInterval> cs;
    cs.reserve(static_cast<std::size_t>(box.dim()));
    for (int k = 0; k < box.dim(); ++k) cs.push_back(box.coord(k));
    cs[static_cast<std::size_t>(axis)].index ^= 1;
    return DyadicBox(std::move(cs)).key();
  }

  static long count_sibling_pairs(const std::vector<const DyadicBox*>& boxes, int dim) {
    std::unordered_set<std::string> keys;
    for (const auto* b : boxes) keys.insert(b->key());
    long pairs = 0;
    for (const auto* b : boxes) {
      for (int l = 0; l < dim; ++l) {
        if (b->coord(l).depth == 0) continue;
        if (keys.count(sibling_key(*b, l))) ++pairs;
      }
    }
    return pairs / 2;
  }

  // (low, high) member split of region r along axis.
  std::pair<std::vector<long>, std::vector<long>> partition_members(const ChainRegion& r,
                                                                    int axis) const {
    const auto& c = r.box.coord(axis);
    std::pair<std::vector<long>, std::vector<long>> out;
    for (long j : r.members) {
      const double y = data_.point(j)[axis];
      std::uint64_t cell =
          static_cast<std::uint64_t>(std::floor(std::ldexp(y, static_cast<int>(c.depth) + 1)));
      const std::uint64_t last = (std::uint64_t{2} << c.depth) - 1;
      if (cell > last) cell = last;
      (cell == c.index * 2 ? out.first : out.second).push_back(j);
    }
    return out;
  }

  int find_region(const std::string& box_key) const {
    for (int i = 0; i < size(); ++i)
      if (regions_[static_cast<std::size_t>(i)].box.key() == box_key) return i;
    return -1;
  }

  bool try_split(std::mt19937_64& rng, double log_move_ratio_extra) {
    const int I = size();
    if (I >= prior_.params().n_cap) return false;
    std::uniform_int_distribution<int> region_pick(0, I - 1);
    std::uniform_int_distribution<int> axis_pick(0, data_.dim() - 1);
    const int ri = region_pick(rng);
    const int axis = axis_pick(rng);
    ChainRegion& r = regions_[static_cast<std::size_t>(ri)];
    if (r.box.coord(axis).depth >= static_cast<std::uint32_t>(kMaxDepth)) return false;

    auto halves = r.box.split(axis);
    auto members = partition_members(r, axis);
    ChainRegion lo{std::move(halves.first), std::move(members.first), 0.0};
    ChainRegion hi{std::move(halves.second), std::move(members.second), 0.0};
    lo.term = region_term(lo);
    hi.term = region_term(hi);

    const double delta_terms = lo.term + hi.term - r.term;
    const double delta_target = log_target_size_part(I + 1) - log_target_size_part(I) +
                                delta_terms;
    // Reverse move: a MERGE at the child state picking this sibling pair.
    const long n_sib_after = sibling_pair_count_after_split(ri, lo.box, hi.box);
    const double log_ratio = delta_target + log_move_ratio_extra -
                             std::log(static_cast<double>(n_sib_after)) +
                             std::log(static_cast<double>(I) * data_.dim());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng)) >= log_ratio) return false;
    sum_terms_ += delta_terms;
    regions_[static_cast<std::size_t>(ri)] = std::move(lo);
    regions_.push_back(std::move(hi));
    return true;
  }

  long sibling_pair_count_after_split(int removed_idx, const DyadicBox& lo,
                                      const DyadicBox& hi) const {
    std::vector<const DyadicBox*> boxes;
    for (int i = 0; i < size(); ++i)
      if (i != removed_idx) boxes.push_back(&regions_[static_cast<std::size_t>(i)].box);
    boxes.push_back(&lo);
    boxes.push_back(&hi);
    return count_sibling_pairs(boxes, data_.dim());
  }

  bool try_merge(std::mt19937_64& rng, double log_move_ratio_extra) {
    const int I = size();
    if (I <= 1) return false;
    auto pairs = sibling_pairs_list();
    if (pairs.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    const auto [a, b] = pairs[pick(rng)];
    ChainRegion merged = merge_regions(a, b);
    const double delta_terms = merged.term - regions_[static_cast<std::size_t>(a)].term -
                               regions_[static_cast<std::size_t>(b)].term;
    const double delta_target =
        log_target_size_part(I - 1) - log_target_size_part(I) + delta_terms;
    const double log_ratio = delta_target + log_move_ratio_extra -
                             std::log(static_cast<double>(I - 1) * data_.dim()) +
                             std::log(static_cast<double>(pairs.size()));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng)) >= log_ratio) return false;
    apply_merge(a, b, std::move(merged), delta_terms);
    return true;
  }

  bool try_swap(std::mt19937_64& rng) {
    const int I = size();
    if (I <= 1) return false;
    auto pairs = sibling_pairs_list();
    if (pairs.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    const long n_sib_before = static_cast<long>(pairs.size());
    const auto [a, b] = pairs[pick(rng)];
    ChainRegion merged = merge_regions(a, b);
    const double delta_merge = merged.term - regions_[static_cast<std::size_t>(a)].term -
                               regions_[static_cast<std::size_t>(b)].term;
    // Intermediate state of size I-1: pick a region and axis to re-split.
    // Index convention: regions with a and b removed, merged appended last.
    std::uniform_int_distribution<int> region_pick(0, I - 2);
    std::uniform_int_distribution<int> axis_pick(0, data_.dim() - 1);
    const int mid_idx = region_pick(rng);
    const int axis = axis_pick(rng);
    // Map the intermediate index back to the current layout.
    std::vector<int> mid_to_cur;
    for (int i = 0; i < I; ++i)
      if (i != a && i != b) mid_to_cur.push_back(i);
    const bool split_merged = mid_idx == I - 2;
    const ChainRegion& target =
        split_merged ? merged : regions_[static_cast<std::size_t>(mid_to_cur[static_cast<std::size_t>(mid_idx)])];
    if (target.box.coord(axis).depth >= static_cast<std::uint32_t>(kMaxDepth)) return false;
    auto halves = target.box.split(axis);
    auto members = partition_members(target, axis);
    ChainRegion lo{std::move(halves.first), std::move(members.first), 0.0};
    ChainRegion hi{std::move(halves.second), std::move(members.second), 0.0};
    lo.term = region_term(lo);
    hi.term = region_term(hi);
    const double delta_split = lo.term + hi.term - target.term;
    const double delta_terms = delta_merge + delta_split;

    // Proposed state's sibling-pair count, for the reverse kernel.
    std::vector<const DyadicBox*> proposed;
    for (int i = 0; i < I; ++i) {
      if (i == a || i == b) continue;
      const DyadicBox* box = &regions_[static_cast<std::size_t>(i)].box;
      if (!split_merged && box == &target.box) continue;
      proposed.push_back(box);
    }
    if (!split_merged) proposed.push_back(&merged.box);
    proposed.push_back(&lo.box);
    proposed.push_back(&hi.box);
    const long n_sib_after = count_sibling_pairs(proposed, data_.dim());

    const double log_ratio = delta_terms + std::log(static_cast<double>(n_sib_before)) -
                             std::log(static_cast<double>(n_sib_after));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (std::log(unif(rng)) >= log_ratio) return false;

    // Apply: remove a and b, add merged; then split the chosen region.
    apply_merge(a, b, std::move(merged), delta_merge);
    // After apply_merge the merged region sits at the end.
    const int cur_target = split_merged
                               ? size() - 1
                               : find_region(lo.box.merged_with(hi.box).key());
    sum_terms_ += delta_split;
    regions_[static_cast<std::size_t>(cur_target)] = std::move(lo);
    regions_.push_back(std::move(hi));
    return true;
  }

  std::vector<std::pair<int, int>> sibling_pairs_list() const {
    std::unordered_map<std::string, int> keys;
    for (int i = 0; i < size(); ++i) keys.emplace(regions_[static_cast<std::size_t>(i)].box.key(), i);
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < size(); ++i) {
      const DyadicBox& box = regions_[static_cast<std::size_t>(i)].box;
      for (int l = 0; l < data_.dim(); ++l) {
        if (box.coord(l).depth == 0) continue;
        auto it = keys.find(sibling_key(box, l));
        if (it != keys.end() && it->second > i) out.emplace_back(i, it->second);
      }
    }
    return out;
  }

  ChainRegion merge_regions(int a, int b) const {
    const ChainRegion& ra = regions_[static_cast<std::size_t>(a)];
    const ChainRegion& rb = regions_[static_cast<std::size_t>(b)];
    ChainRegion merged{ra.box.merged_with(rb.box), {}, 0.0};
    merged.members.reserve(ra.members.size() + rb.members.size());
    merged.members.insert(merged.members.end(), ra.members.begin(), ra.members.end());
    merged.members.insert(merged.members.end(), rb.members.begin(), rb.members.end());
    merged.term = region_term(merged);
    return merged;
  }

  void apply_merge(int a, int b, ChainRegion merged, double delta_terms) {
    sum_terms_ += delta_terms;
    const int lo = std::min(a, b), hi = std::max(a, b);
    regions_.erase(regions_.begin() + hi);
    regions_.erase(regions_.begin() + lo);
    regions_.push_back(std::move(merged));
  }

  // Canonical serialized key plus region order for recording visits.
  std::pair<std::string, std::vector<int>> canonical_key() const {
    std::vector<int> order(static_cast<std::size_t>(size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      return regions_[static_cast<std::size_t>(x)].box < regions_[static_cast<std::size_t>(y)].box;
    });
    std::string key;
    for (int i : order) key += regions_[static_cast<std::size_t>(i)].box.key();
    return {std::move(key), std::move(order)};
  }

  const std::vector<ChainRegion>& regions() const { return regions_; }

 private:
  const Dataset& data_;
  const PriorModel& prior_;
  const McmcOptions& options_;
  std::vector<ChainRegion> regions_;
  double sum_terms_ = 0.0;
};

}  // namespace

PosteriorSummary mcmc_posterior(const Dataset& data, const PriorModel& prior,
                                const McmcOptions& options, McmcDiagnostics* diagnostics) {
  if (options.iterations < 1) throw std::invalid_argument("iterations must be positive");
  if (data.n() < 1) throw std::invalid_argument("inference needs at least one observation");
  const long burn_in = options.burn_in >= 0 ? options.burn_in : options.iterations / 10;
  const long thin = std::max(1L, options.thin);
  const double p_total = options.p_split + options.p_merge + options.p_swap;
  if (!(p_total > 0.0)) throw std::invalid_argument("move probabilities must be positive");

  Chain chain(data, prior, options);
  auto rng = make_rng(options.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  struct UniqueState {
    std::vector<DyadicBox> boxes;   // canonical order
    std::vector<long> counts;       // aligned with boxes
    long visits = 0;
  };
  std::unordered_map<std::string, UniqueState> visited;

  std::string prev_key;
  const double log_merge_over_split = std::log(options.p_merge) - std::log(options.p_split);

  for (long iter = 0; iter < options.iterations; ++iter) {
    const double u = unif(rng) * p_total;
    if (u < options.p_split) {
      if (diagnostics) ++diagnostics->proposed_split;
      if (chain.try_split(rng, log_merge_over_split) && diagnostics)
        ++diagnostics->accepted_split;
    } else if (u < options.p_split + options.p_merge) {
      if (diagnostics) ++diagnostics->proposed_merge;
      if (chain.try_merge(rng, -log_merge_over_split) && diagnostics)
        ++diagnostics->accepted_merge;
    } else {
      if (diagnostics) ++diagnostics->proposed_swap;
      if (chain.try_swap(rng) && diagnostics) ++diagnostics->accepted_swap;
    }

    auto [key, order] = chain.canonical_key();
    if (diagnostics && diagnostics->record_transitions && !prev_key.empty()) {
      ++diagnostics->transitions[{prev_key, key}];
    }
    prev_key = key;

    if (iter >= burn_in && (iter - burn_in) % thin == 0) {
      auto [it, inserted] = visited.try_emplace(key);
      UniqueState& state = it->second;
      if (inserted) {
        for (int i : order) {
          state.boxes.push_back(chain.regions()[static_cast<std::size_t>(i)].box);
          state.counts.push_back(
              static_cast<long>(chain.regions()[static_cast<std::size_t>(i)].members.size()));
        }
      }
      ++state.visits;
    }
  }

  PosteriorSummary summary;
  summary.alpha = prior.params().alpha;
  summary.n = data.n();
  long total_visits = 0;
  for (const auto& [key, state] : visited) total_visits += state.visits;
  std::vector<const std::pair<const std::string, UniqueState>*> ordered;
  for (const auto& kv : visited) ordered.push_back(&kv);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  for (const auto* kv : ordered) {
    const UniqueState& state = kv->second;
    PosteriorEntry entry;
    entry.partition = BinaryPartition::from_boxes(state.boxes);
    entry.counts = state.counts;
    entry.weight = static_cast<double>(state.visits) / static_cast<double>(total_visits);
    entry.log_weight =
        prior.log_prior_partition(entry.partition) +
        (options.prior_only ? 0.0
                            : log_marginal_from_counts(entry.counts, entry.partition,
                                                       prior.params().alpha));
    entry.dirichlet_post.resize(entry.counts.size());
    for (std::size_t i = 0; i < entry.counts.size(); ++i)
      entry.dirichlet_post[i] = prior.params().alpha + static_cast<double>(entry.counts[i]);
    summary.entries.push_back(std::move(entry));
  }
  summary.normalized = true;
  std::map<int, double> by_size = summary.size_distribution();
  double best = -1.0;
  for (const auto& [size, w] : by_size) {
    if (w > best) {
      best = w;
      summary.mode_size = size;
    }
  }
  return summary;
}

PiecewiseDensity posterior_mean_density(const PosteriorSummary& summary, int refine_cap) {
  if (!summary.normalized) throw std::invalid_argument("summary must be normalized");
  if (summary.entries.empty()) throw std::invalid_argument("empty posterior summary");
  BinaryPartition refinement = summary.entries.front().partition;
  for (std::size_t e = 1; e < summary.entries.size(); ++e) {
    refinement = common_refinement(refinement, summary.entries[e].partition);
    if (refinement.size() > refine_cap)
      throw ResourceError("common refinement exceeds cap of " + std::to_string(refine_cap) +
                          " regions");
  }
  std::vector<double> weights(static_cast<std::size_t>(refinement.size()), 0.0);
  const double alpha = summary.alpha;
  for (const auto& entry : summary.entries) {
    const int I = entry.partition.size();
    const double denom = alpha * I + static_cast<double>(summary.n);
    for (const auto& cell : intersection_cells(entry.partition, refinement)) {
      const double theta_hat = entry.dirichlet_post[static_cast<std::size_t>(cell.i)] / denom;
      const int dlog = refinement.region(cell.j).log2_volume() -
                       entry.partition.region(cell.i).log2_volume();
      weights[static_cast<std::size_t>(cell.j)] +=
          entry.weight * std::ldexp(theta_hat, -dlog);
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;
  return PiecewiseDensity(std::move(refinement), std::move(weights));
}

double posterior_concentration_probability(const PosteriorSummary& summary,
                                           const TruthDensity& truth, double radius,
                                           long n_mc, std::uint64_t seed,
                                           const PriorParams& params) {
  if (!summary.normalized) throw std::invalid_argument("summary must be normalized");
  if (n_mc < 1) throw std::invalid_argument("n_mc must be positive");
  auto rng = make_rng(seed);
  double prob = 0.0;
  double weight_used = 0.0;
  for (const auto& entry : summary.entries) {
    if (entry.weight <= 0.0) continue;
    weight_used += entry.weight;
    const long draws =
        std::max(1L, static_cast<long>(std::llround(entry.weight * static_cast<double>(n_mc))));
    const int I = entry.partition.size();
    const double tau = I > 1 ? params.tau(I) : 0.0;
    long exceed = 0;
    for (long d = 0; d < draws; ++d) {
      std::vector<double> theta =
          I == 1 ? std::vector<double>{1.0}
                 : sample_truncated_dirichlet(rng, entry.dirichlet_post, tau);
      PiecewiseDensity f(entry.partition, std::move(theta));
      const double rho = hellinger_to_truth(truth, f);
      if (rho >= radius) ++exceed;
    }
    prob += entry.weight * static_cast<double>(exceed) / static_cast<double>(draws);
  }
  // Renormalize so rounding in the stored weights cannot push the result off
  // the exact endpoints 0 and 1.
  if (weight_used <= 0.0) throw std::invalid_argument("summary carries no weight");
  return prob / weight_used;
}

// ---------------------------------------------------------------------------
// Posterior summary serialization.

std::string PosteriorSummary::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << "adapart-posterior v1\n";
  os << "alpha " << alpha << " n " << n << " entries " << entries.size() << " normalized "
     << (normalized ? 1 : 0) << " mode_size " << mode_size << '\n';
  for (const auto& e : entries) {
    os << e.partition.serialize();
    os << "logw " << e.log_weight << " w " << e.weight << '\n';
    os << "counts";
    for (long c : e.counts) os << ' ' << c;
    os << "\ndirpost";
    for (double d : e.dirichlet_post) os << ' ' << d;
    os << '\n';
  }
  return os.str();
}

PosteriorSummary PosteriorSummary::deserialize(const std::string& text) {
  std::istringstream is(text);
  std::string magic, version;
  is >> magic >> version;
  if (magic != "adapart-posterior" || version != "v1")
    throw std::invalid_argument("unrecognized posterior summary header");
  PosteriorSummary out;
  std::string tag;
  std::size_t count = 0;
  int normalized_flag = 0;
  is >> tag >> out.alpha >> tag >> out.n >> tag >> count >> tag >> normalized_flag >> tag >>
      out.mode_size;
  out.normalized = normalized_flag != 0;
  for (std::size_t e = 0; e < count; ++e) {
    int I = 0, dim = 0;
    if (!(is >> I >> dim)) throw std::invalid_argument("malformed posterior entry");
    std::ostringstream part;
    part << I << ' ' << dim << '\n';
    for (int i = 0; i < I; ++i) {
      for (int l = 0; l < dim; ++l) {
        std::uint64_t d, idx;
        is >> d >> idx;
        part << d << ' ' << idx << (l + 1 < dim ? ' ' : '\n');
      }
    }
    PosteriorEntry entry;
    entry.partition = BinaryPartition::deserialize(part.str());
    is >> tag >> entry.log_weight >> tag >> entry.weight;
    is >> tag;
    entry.counts.resize(static_cast<std::size_t>(I));
    for (auto& c : entry.counts) is >> c;
    is >> tag;
    entry.dirichlet_post.resize(static_cast<std::size_t>(I));
    for (auto& d : entry.dirichlet_post) is >> d;
    if (!is) throw std::invalid_argument("malformed posterior entry body");
    out.entries.push_back(std::move(entry));
  }
  return out;
}

}  // namespace adapart
