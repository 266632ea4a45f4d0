#include "tosc/geom/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "tosc/common/error.hpp"

namespace tosc {
namespace {

constexpr std::uint32_t kLeafSize = 8;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{-1, -1, begin, end, 0, 0.0});
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]];
  Vec3 hi = lo;
  for (std::uint32_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident: stay a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const double split = points_[order_[mid]][axis];
  const std::int32_t l = build(begin, mid);
  const std::int32_t r = build(mid, end);
  Node& n = nodes_[id];
  n.left = l;
  n.right = r;
  n.axis = axis;
  n.split = split;
  return id;
}

Neighbor KdTree::nearest(const Vec3& q) const {
  if (points_.empty()) fail(ErrorCode::InvalidArgument, "kdtree: query on empty tree");
  Neighbor best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
  nearest_rec(0, q, best);
  return best;
}

void KdTree::nearest_rec(std::int32_t id, const Vec3& q, Neighbor& best) const {
  const Node& n = nodes_[id];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const Neighbor c{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (closer(c, best)) best = c;
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const std::int32_t first = diff < 0.0 ? n.left : n.right;
  const std::int32_t second = diff < 0.0 ? n.right : n.left;
  nearest_rec(first, q, best);
  // Equality still descends: a tied point with a lower index may live there.
  if (diff * diff <= best.sq_dist) nearest_rec(second, q, best);
}

std::vector<Neighbor> KdTree::knn(const Vec3& q, std::size_t k) const {
  require(k <= points_.size(), "kdtree: k exceeds point count");
  std::vector<Neighbor> heap;
  if (k == 0) return heap;
  heap.reserve(k + 1);
  knn_rec(0, q, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

void KdTree::knn_rec(std::int32_t id, const Vec3& q, std::size_t k,
                     std::vector<Neighbor>& heap) const {
  const Node& n = nodes_[id];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      const Neighbor c{order_[i], (points_[order_[i]] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(c, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  const std::int32_t first = diff < 0.0 ? n.left : n.right;
  const std::int32_t second = diff < 0.0 ? n.right : n.left;
  knn_rec(first, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().sq_dist) knn_rec(second, q, k, heap);
}

std::vector<std::size_t> KdTree::radius(const Vec3& q, double r2) const {
  std::vector<std::size_t> out;
  if (!points_.empty()) radius_rec(0, q, r2, out);
  return out;
}

void KdTree::radius_rec(std::int32_t id, const Vec3& q, double r2,
                        std::vector<std::size_t>& out) const {
  const Node& n = nodes_[id];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      if ((points_[order_[i]] - q).squaredNorm() <= r2) out.push_back(order_[i]);
    }
    return;
  }
  const double diff = q[n.axis] - n.split;
  if (diff < 0.0 || diff * diff <= r2) radius_rec(n.left, q, r2, out);
  if (diff >= 0.0 || diff * diff <= r2) radius_rec(n.right, q, r2, out);
}

}  // namespace tosc
