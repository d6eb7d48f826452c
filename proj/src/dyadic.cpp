#include "adapart/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "adapart/errors.hpp"

namespace adapart {

namespace {

void check_axis(int axis, int dim) {
  if (axis < 0 || axis >= dim) {
    throw std::invalid_argument("axis " + std::to_string(axis) +
                                " out of range for dimension " + std::to_string(dim));
  }
}

}  // namespace

DyadicBox::DyadicBox(int dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  coords_.resize(static_cast<std::size_t>(dim));
}

DyadicBox::DyadicBox(std::vector<DyadicInterval> coords) : coords_(std::move(coords)) {
  if (coords_.empty()) throw std::invalid_argument("dimension must be positive");
  for (const auto& c : coords_) {
    if (c.depth > kMaxDepth) throw std::invalid_argument("dyadic depth exceeds cap");
    if (c.index >= (std::uint64_t{1} << c.depth) && c.depth > 0)
      throw std::invalid_argument("dyadic index out of range for its depth");
    if (c.depth == 0 && c.index != 0)
      throw std::invalid_argument("dyadic index out of range for its depth");
  }
}

int DyadicBox::log2_volume() const {
  int s = 0;
  for (const auto& c : coords_) s += static_cast<int>(c.depth);
  return s;
}

double DyadicBox::volume() const { return std::ldexp(1.0, -log2_volume()); }

double DyadicBox::lower(int axis) const {
  const auto& c = coords_[axis];
  return std::ldexp(static_cast<double>(c.index), -static_cast<int>(c.depth));
}

double DyadicBox::upper(int axis) const {
  const auto& c = coords_[axis];
  return std::ldexp(static_cast<double>(c.index + 1), -static_cast<int>(c.depth));
}

double DyadicBox::length(int axis) const {
  return std::ldexp(1.0, -static_cast<int>(coords_[axis].depth));
}

bool DyadicBox::contains(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != dim())
    throw std::invalid_argument("point dimension mismatch");
  for (int l = 0; l < dim(); ++l) {
    const double y = point[l];
    if (y < 0.0 || y > 1.0)
      throw std::invalid_argument("point coordinate outside [0,1]");
    const auto& c = coords_[l];
    // Index of the depth-c.depth cell containing y under the half-open
    // convention, with the top cell closed at 1.
    std::uint64_t cell = static_cast<std::uint64_t>(std::floor(std::ldexp(y, static_cast<int>(c.depth))));
    const std::uint64_t last = (std::uint64_t{1} << c.depth) - 1;
    if (cell > last) cell = last;  // y == 1
    if (cell != c.index) return false;
  }
  return true;
}

std::pair<DyadicBox, DyadicBox> DyadicBox::split(int axis) const {
  check_axis(axis, dim());
  const auto& c = coords_[axis];
  if (static_cast<int>(c.depth) >= kMaxDepth)
    throw std::invalid_argument("split would exceed the per-coordinate depth cap");
  DyadicBox lo = *this;
  DyadicBox hi = *this;
  lo.coords_[axis] = {c.depth + 1, c.index * 2};
  hi.coords_[axis] = {c.depth + 1, c.index * 2 + 1};
  return {std::move(lo), std::move(hi)};
}

bool DyadicBox::is_sibling_of(const DyadicBox& other) const {
  if (dim() != other.dim()) return false;
  int diff_axis = -1;
  for (int l = 0; l < dim(); ++l) {
    if (coords_[l] == other.coords_[l]) continue;
    if (diff_axis >= 0) return false;
    diff_axis = l;
  }
  if (diff_axis < 0) return false;
  const auto& a = coords_[diff_axis];
  const auto& b = other.coords_[diff_axis];
  if (a.depth != b.depth || a.depth == 0) return false;
  return (a.index >> 1) == (b.index >> 1) && a.index != b.index;
}

DyadicBox DyadicBox::merged_with(const DyadicBox& sibling) const {
  if (!is_sibling_of(sibling))
    throw std::invalid_argument("boxes are not the two halves of a common dyadic box");
  DyadicBox out = *this;
  for (int l = 0; l < dim(); ++l) {
    if (coords_[l] != sibling.coords_[l]) {
      out.coords_[l] = {coords_[l].depth - 1, coords_[l].index >> 1};
    }
  }
  return out;
}

std::string DyadicBox::key() const {
  std::string out;
  out.reserve(coords_.size() * 12);
  for (const auto& c : coords_) {
    char buf[12];
    std::uint32_t d = c.depth;
    std::memcpy(buf, &d, 4);
    std::uint64_t i = c.index;
    std::memcpy(buf + 4, &i, 8);
    out.append(buf, 12);
  }
  return out;
}

std::optional<DyadicBox> intersect(const DyadicBox& a, const DyadicBox& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch");
  std::vector<DyadicInterval> out(static_cast<std::size_t>(a.dim()));
  for (int l = 0; l < a.dim(); ++l) {
    const DyadicInterval& x = a.coord(l);
    const DyadicInterval& y = b.coord(l);
    const DyadicInterval& shallow = (x.depth <= y.depth) ? x : y;
    const DyadicInterval& deep = (x.depth <= y.depth) ? y : x;
    if ((deep.index >> (deep.depth - shallow.depth)) != shallow.index) return std::nullopt;
    out[static_cast<std::size_t>(l)] = deep;
  }
  return DyadicBox(std::move(out));
}

double intersection_volume(const DyadicBox& a, const DyadicBox& b) {
  auto cell = intersect(a, b);
  return cell ? cell->volume() : 0.0;
}

BinaryPartition::BinaryPartition(std::vector<DyadicBox> boxes, Unchecked)
    : regions_(std::move(boxes)) {
  dim_ = regions_.front().dim();
  std::sort(regions_.begin(), regions_.end());
}

BinaryPartition BinaryPartition::unit_cube(int dim) {
  return BinaryPartition({DyadicBox(dim)}, Unchecked{});
}

namespace {

// Exact check that sum of 2^-e_i over the boxes equals 1: binary carry on
// exponent multiplicities.
bool volumes_sum_to_one(const std::vector<DyadicBox>& boxes) {
  std::map<int, std::uint64_t> count;
  for (const auto& b : boxes) ++count[b.log2_volume()];
  while (!count.empty()) {
    auto it = std::prev(count.end());
    const int e = it->first;
    const std::uint64_t c = it->second;
    count.erase(it);
    if (e == 0) return count.empty() && c == 1;
    if (c % 2 != 0) return false;
    count[e - 1] += c / 2;
  }
  return false;
}

// Greedily merges sibling pairs, deepest boxes first, until a single unit
// cube remains. For a valid binary partition a deepest box always has its
// sibling present, so the reduction terminates at the cube.
bool reduces_to_unit_cube(const std::vector<DyadicBox>& boxes) {
  auto cmp = [](const DyadicBox& a, const DyadicBox& b) {
    return a.log2_volume() < b.log2_volume();
  };
  std::priority_queue<DyadicBox, std::vector<DyadicBox>, decltype(cmp)> heap(cmp);
  std::unordered_set<std::string> live;
  for (const auto& b : boxes) {
    if (!live.insert(b.key()).second) return false;  // duplicate region
    heap.push(b);
  }
  while (!heap.empty()) {
    DyadicBox b = heap.top();
    heap.pop();
    if (!live.count(b.key())) continue;  // already merged away
    if (b.log2_volume() == 0) return live.size() == 1;
    bool merged = false;
    for (int l = 0; l < b.dim() && !merged; ++l) {
      if (b.coord(l).depth == 0) continue;
      DyadicBox sib = b;
      {
        // flip the last bit of the index along axis l
        std::vector<DyadicInterval> cs;
        cs.reserve(static_cast<std::size_t>(b.dim()));
        for (int k = 0; k < b.dim(); ++k) cs.push_back(b.coord(k));
        cs[static_cast<std::size_t>(l)].index ^= 1;
        sib = DyadicBox(std::move(cs));
      }
      auto it = live.find(sib.key());
      if (it == live.end()) continue;
      live.erase(it);
      live.erase(b.key());
      DyadicBox parent = b.merged_with(sib);
      live.insert(parent.key());
      heap.push(parent);
      merged = true;
    }
    if (!merged) return false;
  }
  return false;
}

}  // namespace

BinaryPartition BinaryPartition::from_boxes(std::vector<DyadicBox> boxes) {
  if (boxes.empty()) throw std::invalid_argument("a partition needs at least one region");
  const int dim = boxes.front().dim();
  for (const auto& b : boxes) {
    if (b.dim() != dim) throw std::invalid_argument("mixed dimensions in partition");
  }
  if (!volumes_sum_to_one(boxes))
    throw std::invalid_argument("region volumes do not sum to 1 exactly");
  if (!reduces_to_unit_cube(boxes))
    throw std::invalid_argument("regions are not sibling-closed (not reachable by midpoint splits)");
  return BinaryPartition(std::move(boxes), Unchecked{});
}

BinaryPartition BinaryPartition::split(int region_idx, int axis) const {
  if (region_idx < 0 || region_idx >= size())
    throw std::invalid_argument("region index out of range");
  check_axis(axis, dim_);
  auto halves = regions_[region_idx].split(axis);
  std::vector<DyadicBox> out;
  out.reserve(regions_.size() + 1);
  for (int i = 0; i < size(); ++i) {
    if (i != region_idx) out.push_back(regions_[i]);
  }
  out.push_back(std::move(halves.first));
  out.push_back(std::move(halves.second));
  return BinaryPartition(std::move(out), Unchecked{});
}

BinaryPartition BinaryPartition::merge_siblings(int region_idx_a, int region_idx_b) const {
  if (region_idx_a < 0 || region_idx_a >= size() || region_idx_b < 0 ||
      region_idx_b >= size() || region_idx_a == region_idx_b)
    throw std::invalid_argument("region index out of range");
  const DyadicBox& a = regions_[region_idx_a];
  const DyadicBox& b = regions_[region_idx_b];
  if (!a.is_sibling_of(b))
    throw std::invalid_argument("regions are not siblings");
  std::vector<DyadicBox> out;
  out.reserve(regions_.size() - 1);
  for (int i = 0; i < size(); ++i) {
    if (i != region_idx_a && i != region_idx_b) out.push_back(regions_[i]);
  }
  out.push_back(a.merged_with(b));
  return BinaryPartition(std::move(out), Unchecked{});
}

int BinaryPartition::locate(std::span<const double> point) const {
  for (int i = 0; i < size(); ++i) {
    if (regions_[i].contains(point)) return i;
  }
  // contains() validates the coordinates, so reaching here means an
  // internal inconsistency rather than a bad point.
  throw std::logic_error("point not covered by any region");
}

std::vector<std::pair<int, int>> BinaryPartition::sibling_pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < size(); ++i) {
    for (int j = i + 1; j < size(); ++j) {
      if (regions_[i].is_sibling_of(regions_[j])) out.emplace_back(i, j);
    }
  }
  return out;
}

std::string BinaryPartition::key() const {
  std::string out;
  for (const auto& r : regions_) out += r.key();
  return out;
}

std::string BinaryPartition::serialize() const {
  std::ostringstream os;
  os << size() << ' ' << dim_ << '\n';
  for (const auto& r : regions_) {
    for (int l = 0; l < dim_; ++l) {
      if (l) os << ' ';
      os << r.coord(l).depth << ' ' << r.coord(l).index;
    }
    os << '\n';
  }
  return os.str();
}

BinaryPartition BinaryPartition::deserialize(const std::string& text) {
  std::istringstream is(text);
  int I = 0, dim = 0;
  if (!(is >> I >> dim) || I < 1 || dim < 1)
    throw std::invalid_argument("malformed partition record header");
  std::vector<DyadicBox> boxes;
  boxes.reserve(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i) {
    std::vector<DyadicInterval> cs(static_cast<std::size_t>(dim));
    for (int l = 0; l < dim; ++l) {
      if (!(is >> cs[static_cast<std::size_t>(l)].depth >> cs[static_cast<std::size_t>(l)].index))
        throw std::invalid_argument("malformed partition record body");
    }
    boxes.emplace_back(std::move(cs));
  }
  return from_boxes(std::move(boxes));
}

namespace {

// Level-by-level expansion with canonical-form dedup.
std::vector<BinaryPartition> enumerate_impl(int I, int dim, std::uint64_t cap) {
  if (I < 1) throw std::invalid_argument("partition size must be positive");
  if (dim < 1) throw std::invalid_argument("dimension must be positive");
  std::vector<BinaryPartition> level{BinaryPartition::unit_cube(dim)};
  for (int sz = 1; sz < I; ++sz) {
    std::unordered_set<std::string> seen;
    std::vector<BinaryPartition> next;
    for (const auto& q : level) {
      for (int i = 0; i < q.size(); ++i) {
        for (int l = 0; l < dim; ++l) {
          if (q.region(i).coord(l).depth >= kMaxDepth) continue;
          BinaryPartition child = q.split(i, l);
          if (seen.insert(child.key()).second) {
            if (seen.size() > cap)
              throw ResourceError("partition enumeration exceeds cap of " + std::to_string(cap) +
                                  " canonical forms at size " + std::to_string(sz + 1));
            next.push_back(std::move(child));
          }
        }
      }
    }
    level = std::move(next);
  }
  std::sort(level.begin(), level.end());
  return level;
}

}  // namespace

std::vector<BinaryPartition> enumerate_partitions(int I, int dim, std::uint64_t cap) {
  return enumerate_impl(I, dim, cap);
}

namespace {

// Byte-frugal canonical key: one byte of depth plus just enough index bytes
// per coordinate. Keeps the dedup set small when counting large families.
std::string compact_key(const BinaryPartition& q) {
  std::string out;
  for (const auto& r : q.regions()) {
    for (int l = 0; l < q.dim(); ++l) {
      const auto& c = r.coord(l);
      out.push_back(static_cast<char>(c.depth));
      std::uint64_t idx = c.index;
      const int bytes = (static_cast<int>(c.depth) + 7) / 8;
      for (int b = 0; b < bytes; ++b) {
        out.push_back(static_cast<char>(idx & 0xff));
        idx >>= 8;
      }
    }
  }
  return out;
}

}  // namespace

std::uint64_t count_partitions(int I, int dim, std::uint64_t cap) {
  if (I == 1) return 1;
  const auto level = enumerate_impl(I - 1, dim, cap);
  std::unordered_set<std::string> seen;
  for (const auto& q : level) {
    for (int i = 0; i < q.size(); ++i) {
      for (int l = 0; l < dim; ++l) {
        if (q.region(i).coord(l).depth >= kMaxDepth) continue;
        seen.insert(compact_key(q.split(i, l)));
        if (seen.size() > cap)
          throw ResourceError("partition count exceeds cap of " + std::to_string(cap));
      }
    }
  }
  return static_cast<std::uint64_t>(seen.size());
}

bool partition_count_bound_holds(int I, int dim, double c_star, std::uint64_t cap) {
  const double log_t = std::log(static_cast<double>(count_partitions(I, dim, cap)));
  return log_t <= c_star * I * std::log(static_cast<double>(I)) + 1e-12;
}

}  // namespace adapart
