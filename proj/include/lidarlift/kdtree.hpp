#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lidarlift/pointcloud.hpp"
#include "lidarlift/projection.hpp"

namespace lidarlift {

struct Neighbor {
  std::uint32_t index = 0;  // position in the original cloud
  double distance = 0.0;    // Euclidean, meters

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// K nearest neighbors of `query`, ascending by (distance, index). With self
/// inclusion the query itself is always first, at distance 0.
struct Neighborhood {
  std::uint32_t query = 0;
  std::vector<Neighbor> neighbors;
};

/// Squared Euclidean distance in double precision; shared by the tree and
/// every caller that must agree with it bit for bit.
inline double squared_distance(const Point& a, const Point& b) noexcept {
  const double dx = static_cast<double>(a.x) - static_cast<double>(b.x);
  const double dy = static_cast<double>(a.y) - static_cast<double>(b.y);
  const double dz = static_cast<double>(a.z) - static_cast<double>(b.z);
  return dx * dx + dy * dy + dz * dz;
}

/// Immutable 3-d tree over the masked subset of a cloud. Queries are const and
/// safe to run concurrently.
class KdTree {
 public:
  /// Throws EmptyInput when the mask selects no point.
  KdTree(const PointCloud& cloud, const FovMask& mask);

  std::size_t size() const noexcept { return indices_.size(); }
  /// Original-cloud indices of the indexed points, increasing.
  const std::vector<std::uint32_t>& indexed() const noexcept { return sorted_indices_; }

  /// k nearest indexed points to `query`, ties broken by lower index.
  /// Skips the point with original index `exclude` when it is set.
  std::vector<Neighbor> nearest(const Point& query, std::size_t k,
                                std::int64_t exclude = -1) const;

  /// Neighborhood of the indexed point `index`. With `include_self` the point
  /// is neighbor 0 and the remaining k - 1 come from the other points.
  Neighborhood neighborhood(std::uint32_t index, std::size_t k, bool include_self = true) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
    float split = 0.0F;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Point& q, std::size_t k, std::int64_t exclude,
              std::vector<std::pair<double, std::uint32_t>>& heap) const;

  std::vector<Point> points_;            // full cloud copy, indexed by original index
  std::vector<std::uint32_t> indices_;   // permuted by the build
  std::vector<std::uint32_t> sorted_indices_;
  std::vector<Node> nodes_;
};

}  // namespace lidarlift
