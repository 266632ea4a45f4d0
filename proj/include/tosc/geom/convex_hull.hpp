#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

/// 3D convex hull (quickhull). Faces are outward-oriented triangles.
struct ConvexHull {
  std::vector<std::array<std::size_t, 3>> faces;
  std::vector<bool> is_vertex;  // per input point
  /// Dimension of the affine hull of the input (0..3). For dim < 3 `faces`
  /// is empty and `is_vertex` marks the extreme points of the lower-dimensional hull.
  int dimension = 3;
};

/// `rel_eps` is relative to the largest coordinate magnitude.
ConvexHull convex_hull(std::span<const Vec3> pts, double rel_eps = 1e-11);

}  // namespace tosc
