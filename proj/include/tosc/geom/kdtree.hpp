#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

struct Neighbor {
  std::size_t index = 0;
  double sq_dist = 0.0;
};

/// Exact KD-tree over a fixed point set. Ties are broken towards the lower
/// point index, so results agree bit-for-bit with a brute-force scan.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);
  explicit KdTree(const PointCloud& cloud) : KdTree(std::span<const Vec3>(cloud.points)) {}

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  Neighbor nearest(const Vec3& q) const;

  /// k nearest, sorted by (distance, index).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const;

  /// All points with squared distance <= r2, unsorted.
  std::vector<std::size_t> radius(const Vec3& q, double r2) const;

 private:
  struct Node {
    // Leaf when left == -1: items [begin, end) of order_.
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    int axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void nearest_rec(std::int32_t node, const Vec3& q, Neighbor& best) const;
  void knn_rec(std::int32_t node, const Vec3& q, std::size_t k,
               std::vector<Neighbor>& heap) const;
  void radius_rec(std::int32_t node, const Vec3& q, double r2,
                  std::vector<std::size_t>& out) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace tosc
