#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tosc/common/rng.hpp"
#include "tosc/geom/point_cloud.hpp"
#include "tosc/synth/primitives.hpp"

namespace tosc {

enum class ShapeKind { Mug, Hammer, Bottle, Pan, Knife, Teapot };

inline constexpr ShapeKind kAllShapeKinds[] = {ShapeKind::Mug,   ShapeKind::Hammer,
                                               ShapeKind::Bottle, ShapeKind::Pan,
                                               ShapeKind::Knife, ShapeKind::Teapot};

namespace region {
inline constexpr RegionId kBody = 1;
inline constexpr RegionId kHandle = 2;
inline constexpr RegionId kHead = 3;
inline constexpr RegionId kNeck = 4;
inline constexpr RegionId kCap = 5;
inline constexpr RegionId kBlade = 6;
inline constexpr RegionId kSpout = 7;
inline constexpr RegionId kLid = 8;
}  // namespace region

std::string_view region_name(RegionId id);
/// Throws InvalidArgument for unknown names.
RegionId region_from_name(std::string_view name);

std::string_view kind_name(ShapeKind kind);
/// Throws CategoryNotFound for unknown names.
ShapeKind kind_from_name(std::string_view name);

/// Named dimensions in meters (see default_params for the keys of each kind).
using ShapeParams = std::map<std::string, double>;

ShapeParams default_params(ShapeKind kind);
/// Every dimension scaled by an independent factor in [1 - spread, 1 + spread].
ShapeParams jitter_params(ShapeKind kind, Rng& rng, double spread = 0.15);

/// Union of labelled primitives. sdf() and inside() work in the normalized
/// frame of the cloud the shape was generated with.
struct ProceduralShape {
  ShapeKind kind = ShapeKind::Mug;
  ShapeParams params;
  std::vector<Primitive> parts;  // raw (metric) frame
  std::vector<RegionId> regions;
  Normalization normalization;
  double raw_diagonal = 0.0;  // bbox diagonal of the metric shape, meters

  double sdf_raw(const Vec3& p) const;
  double sdf(const Vec3& p) const;
  bool inside(const Vec3& p) const { return sdf(p) < 0.0; }
  bool has_region(RegionId id) const;
};

/// Validates the params and assembles the primitives; normalization is left
/// as identity.
ProceduralShape build_shape(ShapeKind kind, const ShapeParams& params);

struct GeneratedShape {
  ProceduralShape shape;
  PointCloud cloud;  // normalized, labelled
};

/// Area-uniform labelled surface samples of the union (points inside another
/// part are rejected), normalized to unit bbox diagonal and zero centroid.
GeneratedShape generate_shape(ShapeKind kind, const ShapeParams& params, std::size_t density,
                              std::uint64_t seed);

}  // namespace tosc
