#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tosc/common/rng.hpp"
#include "tosc/geom/point_cloud.hpp"
#include "tosc/synth/tasks.hpp"

namespace tosc {

/// Point at `distance` from the cloud centroid in a uniformly random direction.
Vec3 random_viewpoint(const PointCloud& cloud, Rng& rng, double distance);

/// Simulated single-view scan: HPR-visible points, minus points whose line of
/// sight passes through one of `occluder_count` random spheres placed between
/// the viewpoint and the object, plus Gaussian jitter truncated at 3 sigma.
/// Labels are carried through.
PointCloud render_partial(const PointCloud& shape_cloud, const Vec3& viewpoint,
                          double noise_sigma, int occluder_count, std::uint64_t seed);

enum class SabotageOp { RemoveTaskRegion, AddNoise, PerturbPatches };

std::string to_string(SabotageOp op);
SabotageOp sabotage_op_from_string(const std::string& s);

struct CorruptionRecord {
  std::vector<SabotageOp> ops;  // in application order
  int removed_points = 0;
  int outlier_points = 0;
  int perturbed_patches = 0;
  double max_shift = 0.0;  // largest patch displacement, normalized units

  bool operator==(const CorruptionRecord&) const = default;
};

struct SabotageResult {
  PointCloud cloud;
  CorruptionRecord record;
};

/// Applies the requested ops in the fixed order remove -> perturb -> noise.
/// Outliers carry label 0.
SabotageResult sabotage(const PointCloud& sample, const TaskSpec& task,
                        const std::vector<SabotageOp>& ops, std::uint64_t seed);

}  // namespace tosc
