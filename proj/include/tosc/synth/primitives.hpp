#pragma once

#include "tosc/common/rng.hpp"
#include "tosc/geom/point_cloud.hpp"

namespace tosc {

/// Solid building block with an exact signed distance and area-uniform
/// surface sampling.
struct Primitive {
  enum class Type { Sphere, Capsule, Box, Cylinder, TorusArc };

  Type type = Type::Sphere;
  RegionId region = 0;
  Vec3 center = Vec3::Zero();  // sphere/box/cylinder center, capsule end a, torus-arc center
  Vec3 end = Vec3::Zero();     // capsule end b
  Mat3 frame = Mat3::Identity();  // box/cylinder/torus local axes as columns
  Vec3 half = Vec3::Zero();       // box half extents; cylinder uses half.z() as half height
  double radius = 0.0;            // sphere, capsule, cylinder radius; torus tube radius
  double major = 0.0;             // torus-arc major radius
  double arc_lo = 0.0, arc_hi = 0.0;  // torus arc angle range in the frame's x-y plane

  static Primitive sphere(RegionId region, const Vec3& c, double r);
  static Primitive capsule(RegionId region, const Vec3& a, const Vec3& b, double r);
  static Primitive box(RegionId region, const Vec3& c, const Vec3& half_extents,
                       const Mat3& frame = Mat3::Identity());
  /// Capped cylinder along frame.col(2).
  static Primitive cylinder(RegionId region, const Vec3& c, double r, double half_height,
                            const Mat3& frame = Mat3::Identity());
  /// Tube of radius r around a circular arc of radius R in the frame's x-y
  /// plane, from angle lo to hi, with rounded ends.
  static Primitive torus_arc(RegionId region, const Vec3& c, double R, double r, double lo,
                             double hi, const Mat3& frame = Mat3::Identity());

  double sdf(const Vec3& p) const;
  double area() const;
  Vec3 sample_surface(Rng& rng) const;
  void validate() const;
};

/// Orthonormal frame whose z axis is `axis`.
Mat3 frame_from_z(const Vec3& axis);

}  // namespace tosc
