#pragma once

#include <cstddef>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

/// Merge radius as a fraction of the combined bbox diagonal.
inline constexpr double kDefaultMergeFraction = 0.005;

struct FuseResult {
  PointCloud cloud;
  std::vector<bool> from_input;  // provenance per output point
};

/// Concatenate observation and aligned generated cloud, drop generated points
/// closer than the merge radius to an already kept point, then FPS (or
/// deterministic padding) to exactly n_out points. FPS starts at the first
/// observed point, so at least one observed point always survives.
FuseResult fuse_with_provenance(const PointCloud& input_cloud, const PointCloud& aligned_gen,
                                std::size_t n_out, double merge_fraction = kDefaultMergeFraction);

inline PointCloud fuse(const PointCloud& input_cloud, const PointCloud& aligned_gen,
                       std::size_t n_out, double merge_fraction = kDefaultMergeFraction) {
  return fuse_with_provenance(input_cloud, aligned_gen, n_out, merge_fraction).cloud;
}

}  // namespace tosc
