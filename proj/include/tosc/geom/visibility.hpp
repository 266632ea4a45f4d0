#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

inline constexpr double kDefaultHprRadiusFactor = 100.0;

/// Hidden point removal by spherical flipping + convex hull. Returns the
/// sorted indices of points visible from `viewpoint`.
std::vector<std::size_t> hpr_visible(const PointCloud& cloud, const Vec3& viewpoint,
                                     double radius_factor = kDefaultHprRadiusFactor);

/// Candidate with the most visible points; first one wins ties.
Vec3 select_viewpoint(const PointCloud& cloud, std::span<const Vec3> candidates,
                      double radius_factor = kDefaultHprRadiusFactor);

}  // namespace tosc
