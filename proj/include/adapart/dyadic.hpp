#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace adapart {

// Depth cap per coordinate so indices always fit in 64-bit integers.
inline constexpr int kMaxDepth = 62;

struct DyadicInterval {
  std::uint32_t depth = 0;
  std::uint64_t index = 0;
  friend auto operator<=>(const DyadicInterval&, const DyadicInterval&) = default;
};

/// Axis-aligned product of dyadic intervals [k*2^-d, (k+1)*2^-d).
///
/// Intervals are half-open on the upper side except when the upper endpoint
/// is 1, in which case they are closed; the boxes of a partition therefore
/// tile [0,1]^p exactly. Volumes are exact powers of two and are manipulated
/// through their base-2 exponent, never through accumulated floating point.
class DyadicBox {
 public:
  explicit DyadicBox(int dim);
  explicit DyadicBox(std::vector<DyadicInterval> coords);

  int dim() const { return static_cast<int>(coords_.size()); }
  const DyadicInterval& coord(int axis) const { return coords_[axis]; }

  /// Sum of per-coordinate depths; volume() == 2^-log2_volume().
  int log2_volume() const;
  double volume() const;

  double lower(int axis) const;
  double upper(int axis) const;
  double length(int axis) const;

  bool contains(std::span<const double> point) const;

  /// Halves along the midpoint of the given axis. Throws on depth overflow
  /// or axis out of range.
  std::pair<DyadicBox, DyadicBox> split(int axis) const;

  /// True when the two boxes are the two halves of a common dyadic box.
  bool is_sibling_of(const DyadicBox& other) const;

  /// Union with a sibling. Throws if the boxes are not siblings.
  DyadicBox merged_with(const DyadicBox& sibling) const;

  /// Compact binary key, suitable for hashing and map lookups.
  std::string key() const;

  friend auto operator<=>(const DyadicBox&, const DyadicBox&) = default;

 private:
  std::vector<DyadicInterval> coords_;
};

/// Exact intersection: per coordinate, two dyadic intervals are either
/// disjoint or nested, so the intersection is empty or a dyadic box.
std::optional<DyadicBox> intersect(const DyadicBox& a, const DyadicBox& b);

/// Exact measure of a ∩ b: zero or a power of two.
double intersection_volume(const DyadicBox& a, const DyadicBox& b);

/// A size-I set of dyadic boxes tiling the unit cube, reachable from the
/// cube by midpoint splits. Regions are kept in canonical (sorted) order, so
/// two equal partitions compare equal structurally. Immutable after
/// construction; all operations return new values.
class BinaryPartition {
 public:
  BinaryPartition() = default;  // empty placeholder, size 0

  static BinaryPartition unit_cube(int dim);

  /// Validates the tiling: equal dimensions, exact volume sum 1, and
  /// sibling-closure (the boxes merge back to the unit cube).
  static BinaryPartition from_boxes(std::vector<DyadicBox> boxes);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(regions_.size()); }
  const DyadicBox& region(int i) const { return regions_[i]; }
  const std::vector<DyadicBox>& regions() const { return regions_; }

  BinaryPartition split(int region_idx, int axis) const;
  BinaryPartition merge_siblings(int region_idx_a, int region_idx_b) const;

  /// Index of the unique region containing the point. Throws on
  /// coordinates outside [0,1].
  int locate(std::span<const double> point) const;

  /// All pairs (i, j), i < j, of regions that are siblings.
  std::vector<std::pair<int, int>> sibling_pairs() const;

  std::string key() const;

  std::string serialize() const;
  static BinaryPartition deserialize(const std::string& text);

  friend auto operator<=>(const BinaryPartition&, const BinaryPartition&) = default;

 private:
  struct Unchecked {};
  BinaryPartition(std::vector<DyadicBox> boxes, Unchecked);

  std::vector<DyadicBox> regions_;
  int dim_ = 0;

  friend std::vector<BinaryPartition> enumerate_partitions(int, int, std::uint64_t);
};

struct PartitionHash {
  std::size_t operator()(const BinaryPartition& q) const {
    return std::hash<std::string>{}(q.key());
  }
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// All distinct binary partitions of size I of [0,1]^dim, in deterministic
/// (canonical) order. Throws ResourceError when the number of canonical
/// forms at any level exceeds the cap.
std::vector<BinaryPartition> enumerate_partitions(int I, int dim,
                                                  std::uint64_t cap = kDefaultEnumerationCap);

/// |enumerate_partitions(I, dim)| without retaining the partitions.
std::uint64_t count_partitions(int I, int dim,
                               std::uint64_t cap = kDefaultEnumerationCap);

/// Checks log T_I <= c_star * I * log I for a caller-supplied c_star.
bool partition_count_bound_holds(int I, int dim, double c_star,
                                 std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace adapart
