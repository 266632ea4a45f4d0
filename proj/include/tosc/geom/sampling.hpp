#pragma once

#include <cstddef>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

/// Farthest point sampling. Returns `m` distinct indices in selection order,
/// starting at `seed_index`; ties go to the lowest index.
std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t m, std::size_t seed_index = 0);

/// FPS centers plus their k-nearest-neighbour groups.
struct PatchSet {
  std::vector<std::size_t> centers;              // indices into the source cloud
  std::vector<std::vector<std::size_t>> groups;  // each of size k_neighbors
  std::size_t k_neighbors = 0;

  std::size_t size() const { return centers.size(); }
};

/// Each group holds the k nearest points to its center, ordered by
/// (distance, index).
PatchSet knn_group(const PointCloud& cloud, const std::vector<std::size_t>& centers,
                   std::size_t k);

/// Resample to exactly n points: FPS when the cloud is larger, otherwise the
/// original points followed by deterministic repeats chosen by FPS order.
std::vector<std::size_t> resample_indices(const PointCloud& cloud, std::size_t n);
PointCloud resample(const PointCloud& cloud, std::size_t n);

}  // namespace tosc
