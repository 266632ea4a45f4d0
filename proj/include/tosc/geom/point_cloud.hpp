#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace tosc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Region id 0 means "unlabeled".
using RegionId = int;

/// N x 3 positions with optional per-point region labels.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<RegionId> labels;  // empty, or exactly points.size() entries

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {}
  PointCloud(std::vector<Vec3> pts, std::vector<RegionId> lbl)
      : points(std::move(pts)), labels(std::move(lbl)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool labeled() const { return !labels.empty(); }

  RegionId label(std::size_t i) const { return labels.empty() ? 0 : labels[i]; }

  void push_back(const Vec3& p, RegionId l = 0);

  /// Checks the type invariants (finite coordinates, label arity).
  void validate() const;

  PointCloud subset(std::span<const std::size_t> idx) const;

  /// Indices whose label equals `region`.
  std::vector<std::size_t> indices_with_label(RegionId region) const;
};

struct Aabb {
  Vec3 lo;
  Vec3 hi;
  double diagonal() const { return (hi - lo).norm(); }
  Vec3 center() const { return 0.5 * (lo + hi); }
  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

Aabb bounding_box(std::span<const Vec3> pts);
inline Aabb bounding_box(const PointCloud& c) { return bounding_box(c.points); }

Vec3 centroid(std::span<const Vec3> pts);

/// Uniform scale + translation that maps a cloud to unit bbox diagonal,
/// centroid at the origin: p' = (p - center) * scale.
struct Normalization {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;
  Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
};

Normalization unit_diagonal_normalization(const PointCloud& c);
PointCloud apply(const Normalization& n, const PointCloud& c);

/// Concatenation; labels are kept if either side is labeled.
PointCloud concat(const PointCloud& a, const PointCloud& b);

}  // namespace tosc
