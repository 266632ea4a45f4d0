#include "tosc/geom/point_cloud.hpp"

#include <cmath>
#include <limits>

#include "tosc/common/error.hpp"

namespace tosc {

void PointCloud::push_back(const Vec3& p, RegionId l) {
  if (!labels.empty() || l != 0) {
    labels.resize(points.size(), 0);
    labels.push_back(l);
  }
  points.push_back(p);
}

void PointCloud::validate() const {
  require(labels.empty() || labels.size() == points.size(),
          "point cloud: label count does not match point count");
  for (const auto& p : points) {
    require(p.allFinite(), "point cloud: non-finite coordinate");
  }
}

PointCloud PointCloud::subset(std::span<const std::size_t> idx) const {
  PointCloud out;
  out.points.reserve(idx.size());
  if (labeled()) out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    require(i < points.size(), "point cloud: subset index out of range");
    out.points.push_back(points[i]);
    if (labeled()) out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> PointCloud::indices_with_label(RegionId region) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == region) out.push_back(i);
  }
  return out;
}

Aabb bounding_box(std::span<const Vec3> pts) {
  require(!pts.empty(), "bounding_box: empty point set");
  Aabb box{pts[0], pts[0]};
  for (const auto& p : pts) {
    box.lo = box.lo.cwiseMin(p);
    box.hi = box.hi.cwiseMax(p);
  }
  return box;
}

Vec3 centroid(std::span<const Vec3> pts) {
  require(!pts.empty(), "centroid: empty point set");
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

Normalization unit_diagonal_normalization(const PointCloud& c) {
  const Aabb box = bounding_box(c);
  const double diag = box.diagonal();
  if (!(diag > 0.0)) fail(ErrorCode::DegenerateGeometry, "normalization: zero-extent cloud");
  return Normalization{centroid(c.points), 1.0 / diag};
}

PointCloud apply(const Normalization& n, const PointCloud& c) {
  PointCloud out = c;
  for (auto& p : out.points) p = n.apply(p);
  return out;
}

PointCloud concat(const PointCloud& a, const PointCloud& b) {
  PointCloud out;
  out.points.reserve(a.size() + b.size());
  out.points.insert(out.points.end(), a.points.begin(), a.points.end());
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  if (a.labeled() || b.labeled()) {
    out.labels.reserve(out.points.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.labels.push_back(a.label(i));
    for (std::size_t i = 0; i < b.size(); ++i) out.labels.push_back(b.label(i));
  }
  return out;
}

}  // namespace tosc
