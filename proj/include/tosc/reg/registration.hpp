#pragma once

#include <array>
#include <vector>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

/// p -> k * R * p + t (scale applied in the source frame, then rotation, then translation).
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
  PointCloud apply(const PointCloud& c) const;
  SimilarityTransform inverse() const;
  SimilarityTransform compose(const SimilarityTransform& inner) const;  // this ∘ inner

  /// (k, row-major R, t): the 13-scalar manifest encoding.
  std::array<double, 13> to_array() const;
  static SimilarityTransform from_array(const std::array<double, 13>& a);

  void validate() const;
};

/// Geodesic angle between two rotations, in radians.
double rotation_angle(const Mat3& a, const Mat3& b);

struct IcpConfig {
  double w_task = 2.0;
  double tolerance = 1e-7;  // absolute objective decrease
  int max_iterations = 50;
};

struct RegistrationResult {
  SimilarityTransform transform;
  double objective = 0.0;          // final task-weighted Chamfer objective
  double initial_objective = 0.0;  // objective of the untransformed source
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after initialisation and after each accepted step
};

/// CD(target, X(source)) + w_task * CD(target_task, X(source_task)).
double registration_objective(const PointCloud& target, const PointCloud& source,
                              const PointCloud& target_task, const PointCloud& source_task,
                              double w_task, const SimilarityTransform& x);

/// Scaled ICP on the task-weighted two-sided Chamfer objective. Each step
/// takes nearest-neighbour pairs in both directions on both cloud pairs and
/// solves the weighted similarity Procrustes problem in closed form.
RegistrationResult task_weighted_icp(const PointCloud& target, const PointCloud& source,
                                     const PointCloud& target_task,
                                     const PointCloud& source_task, const IcpConfig& config = {});

struct WeightedPair {
  Vec3 source;
  Vec3 target;
  double weight;
};

/// argmin over (k, R, t) of sum w * |target - (k R source + t)|^2 with R in SO(3).
SimilarityTransform weighted_procrustes(const std::vector<WeightedPair>& pairs);

}  // namespace tosc
