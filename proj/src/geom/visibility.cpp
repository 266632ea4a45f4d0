#include "tosc/geom/visibility.hpp"

#include <algorithm>

#include "tosc/common/error.hpp"
#include "tosc/geom/convex_hull.hpp"

namespace tosc {

std::vector<std::size_t> hpr_visible(const PointCloud& cloud, const Vec3& viewpoint,
                                     double radius_factor) {
  require(!cloud.empty(), "hpr_visible: empty cloud");
  require(radius_factor > 0.0, "hpr_visible: radius_factor must be positive");

  const std::size_t n = cloud.size();
  std::vector<Vec3> flipped(n + 1);
  double max_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (cloud.points[i] - viewpoint).norm();
    require(r > 0.0, "hpr_visible: viewpoint coincides with a cloud point");
    max_norm = std::max(max_norm, r);
  }
  const double radius = radius_factor * max_norm;
  for (std::size_t i = 0; i < n; ++i) {
    // Work in units of the sphere radius so the hull tolerance is scale-free.
    const Vec3 q = (cloud.points[i] - viewpoint) / radius;
    const double r = q.norm();
    flipped[i] = q + 2.0 * (1.0 - r) * q / r;
  }
  flipped[n] = Vec3::Zero();

  const ConvexHull hull = convex_hull(flipped);
  std::vector<std::size_t> out;
  if (hull.dimension < 3) {
    // Flat or collinear configuration: every point lies on the hull boundary.
    for (std::size_t i = 0; i < n; ++i) out.push_back(i);
    return out;
  }

  std::vector<bool> visible(hull.is_vertex.begin(), hull.is_vertex.begin() + n);
  // Points lying exactly on a hull face (coplanar configurations) count as visible.
  constexpr double kOnHullTol = 1e-10;
  std::vector<Vec3> normals;
  std::vector<double> offsets;
  for (const auto& f : hull.faces) {
    Vec3 nrm = (flipped[f[1]] - flipped[f[0]]).cross(flipped[f[2]] - flipped[f[0]]);
    const double len = nrm.norm();
    if (len == 0.0) continue;
    nrm /= len;
    normals.push_back(nrm);
    offsets.push_back(nrm.dot(flipped[f[0]]));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (visible[i]) continue;
    for (std::size_t f = 0; f < normals.size(); ++f) {
      if (normals[f].dot(flipped[i]) - offsets[f] > -kOnHullTol) {
        visible[i] = true;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (visible[i]) out.push_back(i);
  }
  return out;
}

Vec3 select_viewpoint(const PointCloud& cloud, std::span<const Vec3> candidates,
                      double radius_factor) {
  require(!candidates.empty(), "select_viewpoint: no candidate viewpoints");
  std::size_t best = 0;
  std::size_t best_count = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const std::size_t count = hpr_visible(cloud, candidates[c], radius_factor).size();
    if (c == 0 || count > best_count) {
      best = c;
      best_count = count;
    }
  }
  return candidates[best];
}

}  // namespace tosc
