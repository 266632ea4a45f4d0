#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tosc/geom/point_cloud.hpp"
#include "tosc/synth/partial.hpp"
#include "tosc/synth/shapes.hpp"
#include "tosc/synth/tasks.hpp"

namespace tosc {

struct DatasetSample {
  std::string id;
  PointCloud partial;       // the (possibly corrupted) observation, n_points
  PointCloud ground_truth;  // full labelled shape, n_points
  TaskSpec task;
  bool plausible = true;
  CorruptionRecord corruption;
  std::uint64_t seed = 0;
};

struct DatasetConfig {
  std::size_t n_points = 2048;
  double noise_sigma = 0.002;  // normalized units
  int max_views = 3;
  int max_occluders = 2;
  double view_distance = 2.0;
  double param_spread = 0.15;
  /// A ground-truth task point counts as retained when a sample point lies
  /// within this distance (normalized units).
  double retention_radius = 0.05;
  std::vector<ShapeKind> kinds{std::begin(kAllShapeKinds), std::end(kAllShapeKinds)};
};

/// Fraction of ground-truth points of `region` that have a sample point
/// within `radius`. 1 when the region is absent from the ground truth.
double task_retention(const PointCloud& sample, const PointCloud& gt, RegionId region,
                      double radius);

/// Shape observed through 1..max_views scans, with the task region kept
/// whole, resampled to n_points. Used for plausible samples and as the base
/// of implausible ones.
PointCloud plausible_observation(const GeneratedShape& gt, const TaskSpec& task,
                                 const DatasetConfig& config, std::uint64_t seed);

/// n_plausible plausible samples followed by n_implausible sabotaged ones.
/// Every sample is a pure function of (seed, index, config).
std::vector<DatasetSample> build_dataset(std::size_t n_plausible, std::size_t n_implausible,
                                         std::uint64_t seed, const DatasetConfig& config = {});

/// PLY pairs plus manifest.jsonl in `dir`.
void write_dataset(const std::filesystem::path& dir, const std::vector<DatasetSample>& samples);
std::vector<DatasetSample> read_dataset(const std::filesystem::path& dir);

}  // namespace tosc
