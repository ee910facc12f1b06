#include "lidarlift/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidarlift/error.hpp"

namespace lidarlift {

namespace {

constexpr std::uint32_t kLeafSize = 12;

float coord(const Point& p, int axis) noexcept {
  return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

}  // namespace

KdTree::KdTree(const PointCloud& cloud, const FovMask& mask) : points_(cloud.points) {
  if (mask.size() != cloud.size()) {
    throw Error(ErrorKind::SizeMismatch, "mask length " + std::to_string(mask.size()) +
                                             " does not match cloud size " +
                                             std::to_string(cloud.size()));
  }
  if (mask.count() == 0) throw Error(ErrorKind::EmptyInput, "KD-tree over zero points");
  indices_ = mask.index_map;
  sorted_indices_ = mask.index_map;
  nodes_.reserve(2 * (indices_.size() / kLeafSize + 1));
  build(0, static_cast<std::uint32_t>(indices_.size()));
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  std::array<float, 3> lo{points_[indices_[begin]].x, points_[indices_[begin]].y,
                          points_[indices_[begin]].z};
  std::array<float, 3> hi = lo;
  for (auto i = begin; i < end; ++i) {
    const auto& p = points_[indices_[i]];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], coord(p, a));
      hi[a] = std::max(hi[a], coord(p, a));
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a) {
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  }
  if (hi[axis] == lo[axis]) return id;  // all coincident

  const auto mid = begin + (end - begin) / 2;
  auto first = indices_.begin() + begin;
  std::nth_element(first, indices_.begin() + mid, indices_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const float ca = coord(points_[a], axis);
                     const float cb = coord(points_[b], axis);
                     return ca < cb || (ca == cb && a < b);
                   });
  const float split = coord(points_[indices_[mid]], axis);
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  auto& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

void KdTree::search(std::int32_t node_id, const Point& q, std::size_t k, std::int64_t exclude,
                    std::vector<std::pair<double, std::uint32_t>>& heap) const {
  const auto& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const std::uint32_t idx = indices_[i];
      if (static_cast<std::int64_t>(idx) == exclude) continue;
      const std::pair<double, std::uint32_t> cand{squared_distance(q, points_[idx]), idx};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = static_cast<double>(coord(q, node.axis)) - static_cast<double>(node.split);
  const auto near = diff < 0.0 ? node.left : node.right;
  const auto far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, exclude, heap);
  // Points beyond the plane are at least |diff| away; equality must still be
  // visited because a lower index can win the tie.
  if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, exclude, heap);
}

std::vector<Neighbor> KdTree::nearest(const Point& query, std::size_t k,
                                      std::int64_t exclude) const {
  std::vector<std::pair<double, std::uint32_t>> heap;
  if (k == 0) return {};
  heap.reserve(k + 1);
  search(0, query, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end());
  std::vector<Neighbor> out;
  out.reserve(heap.size());
  for (const auto& [d2, idx] : heap) out.push_back({idx, std::sqrt(d2)});
  return out;
}

Neighborhood KdTree::neighborhood(std::uint32_t index, std::size_t k, bool include_self) const {
  Neighborhood n;
  n.query = index;
  const auto& q = points_[index];
  if (!include_self) {
    n.neighbors = nearest(q, k, index);
    return n;
  }
  if (k == 0) return n;
  n.neighbors.push_back({index, 0.0});
  auto rest = nearest(q, k - 1, index);
  n.neighbors.insert(n.neighbors.end(), rest.begin(), rest.end());
  return n;
}

}  // namespace lidarlift
