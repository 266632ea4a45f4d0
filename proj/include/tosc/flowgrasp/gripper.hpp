#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "tosc/geom/point_cloud.hpp"

namespace tosc {

using GraspVector = Eigen::VectorXd;
using Jacobian = Eigen::Matrix<double, 3, Eigen::Dynamic>;

/// Gram-Schmidt rotation from the 6D representation (first two columns).
/// Throws DegenerateGeometry when the two columns are (nearly) parallel.
Mat3 rotation_from_6d(const Eigen::Ref<const Eigen::VectorXd>& r6);
Eigen::Matrix<double, 6, 1> rotation_to_6d(const Mat3& r);

/// Three-finger gripper, two flexion joints per finger. Fingers sit on a
/// circle of radius palm_radius in the palm xy plane and extend along +z at
/// rest; positive flexion curls them towards the palm axis. Lengths are in
/// object-normalized units (unit bounding-box diagonal).
struct GripperModel {
  int fingers = 3;
  double palm_radius = 0.07;
  double link1 = 0.11;
  double link2 = 0.09;
  double tip_radius = 0.025;
  double link_radius = 0.02;
  double palm_sphere_radius = 0.06;
  std::array<double, 2> joint_lo{-0.4, 0.0};
  std::array<double, 2> joint_hi{1.6, 1.8};

  int joints() const { return 2 * fingers; }
  int dim() const { return 9 + joints(); }
  double joint_lower(int j) const { return joint_lo[static_cast<std::size_t>(j % 2)]; }
  double joint_upper(int j) const { return joint_hi[static_cast<std::size_t>(j % 2)]; }
  void validate() const;
};

struct GraspPose {
  Vec3 translation;
  Mat3 rotation;
  Eigen::VectorXd joints;
};

GraspPose decode_grasp(const GripperModel& g, const GraspVector& x);
GraspVector encode_grasp(const GripperModel& g, const GraspPose& pose);

/// Points on the hand with their radii and Jacobians d(point)/dx (3 x D).
struct HandPoints {
  std::vector<Vec3> points;
  std::vector<double> radii;
  std::vector<Jacobian> jacobians;
};

/// Fingertip sphere centers, one per finger.
HandPoints fk_fingertips(const GripperModel& g, const GraspVector& x);

/// Collision spheres for the whole hand: palm, link samples and fingertips.
HandPoints hand_spheres(const GripperModel& g, const GraspVector& x);

}  // namespace tosc
