#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tosc/flowgrasp/gripper.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/synth/shapes.hpp"

namespace tosc {

struct OracleGraspConfig {
  int iterations = 250;
  double lr = 0.01;
  int max_attempts = 8;          // per requested grasp
  double max_penetration = 0.004;  // deepest sphere insertion, normalized units
  double contact_tolerance = 0.015;
  int min_contacts = 2;
  double w_penetration = 1.0;
  double w_contact = 0.5;
  double w_joint_limits = 0.1;
};

struct OracleEnergy {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// Energy minimized by the oracle: SDF penetration of every hand sphere,
/// fingertip-to-task-surface gap, joint limits and a 6D-frame regularizer.
OracleEnergy oracle_energy(const GripperModel& g, const GraspVector& x, const ProceduralShape& shape,
                           const KdTree& task_tree, const PointCloud& task,
                           const OracleGraspConfig& cfg);

/// Reference grasps for one shape and region by gradient descent from
/// randomized approach poses. Returns at most `count` accepted grasps with
/// orthonormal 6D frames.
std::vector<GraspVector> synthesize_grasps(const GripperModel& g, const ProceduralShape& shape,
                                           const PointCloud& task_region, std::size_t count,
                                           std::uint64_t seed, const OracleGraspConfig& cfg = {});

struct GraspRecord {
  GraspVector x;
  std::string gripper = "tri3x2";
  std::string object;
  std::string task_text;
  std::uint64_t seed = 0;
};

void write_grasps(const std::filesystem::path& path, const std::vector<GraspRecord>& grasps);
std::vector<GraspRecord> read_grasps(const std::filesystem::path& path);

}  // namespace tosc
