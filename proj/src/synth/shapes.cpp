#include "tosc/synth/shapes.hpp"

#include <algorithm>
#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc {

namespace {

constexpr double kPi = 3.14159265358979323846;

constexpr std::string_view kRegionNames[] = {"unlabeled", "body",  "handle", "head", "neck",
                                             "cap",       "blade", "spout",  "lid"};

double deg(double d) { return d * kPi / 180.0; }

// Arc plane spanned by +x and +z (frame z axis = -y keeps it right-handed).
Mat3 xz_plane() {
  Mat3 f;
  f.col(0) = Vec3::UnitX();
  f.col(1) = Vec3::UnitZ();
  f.col(2) = -Vec3::UnitY();
  return f;
}

double get(const ShapeParams& p, const char* key) {
  const auto it = p.find(key);
  require(it != p.end(), std::string("shape params: missing key ") + key);
  return it->second;
}

}  // namespace

std::string_view region_name(RegionId id) {
  require(id >= 0 && id < static_cast<RegionId>(std::size(kRegionNames)), "unknown region id");
  return kRegionNames[id];
}

RegionId region_from_name(std::string_view name) {
  for (std::size_t i = 1; i < std::size(kRegionNames); ++i) {
    if (kRegionNames[i] == name) return static_cast<RegionId>(i);
  }
  fail(ErrorCode::InvalidArgument, "unknown region name: " + std::string(name));
}

std::string_view kind_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Mug: return "mug";
    case ShapeKind::Hammer: return "hammer";
    case ShapeKind::Bottle: return "bottle";
    case ShapeKind::Pan: return "pan";
    case ShapeKind::Knife: return "knife";
    case ShapeKind::Teapot: return "teapot";
  }
  return "mug";
}

ShapeKind kind_from_name(std::string_view name) {
  for (ShapeKind k : kAllShapeKinds) {
    if (kind_name(k) == name) return k;
  }
  fail(ErrorCode::CategoryNotFound, "unknown object category: " + std::string(name));
}

ShapeParams default_params(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Mug:
      return {{"body_radius", 0.04}, {"body_height", 0.10}, {"handle_major", 0.03},
              {"handle_minor", 0.007}};
    case ShapeKind::Hammer:
      return {{"handle_length", 0.24}, {"handle_radius", 0.012}, {"head_length", 0.12},
              {"head_width", 0.036}};
    case ShapeKind::Bottle:
      return {{"body_radius", 0.035}, {"body_height", 0.16}, {"neck_radius", 0.015},
              {"neck_height", 0.05}, {"cap_radius", 0.018}, {"cap_height", 0.024}};
    case ShapeKind::Pan:
      return {{"body_radius", 0.10}, {"body_height", 0.04}, {"handle_length", 0.18},
              {"handle_radius", 0.012}};
    case ShapeKind::Knife:
      return {{"handle_length", 0.10}, {"handle_radius", 0.012}, {"blade_length", 0.18},
              {"blade_width", 0.044}, {"blade_thickness", 0.006}};
    case ShapeKind::Teapot:
      return {{"body_radius", 0.07}, {"spout_length", 0.09}, {"spout_radius", 0.012},
              {"handle_major", 0.035}, {"handle_minor", 0.008}, {"lid_radius", 0.03},
              {"lid_height", 0.02}};
  }
  return {};
}

ShapeParams jitter_params(ShapeKind kind, Rng& rng, double spread) {
  require(spread >= 0.0 && spread < 0.5, "jitter spread must be in [0, 0.5)");
  ShapeParams p = default_params(kind);
  for (auto& [key, value] : p) value *= uniform(rng, 1.0 - spread, 1.0 + spread);
  return p;
}

double ProceduralShape::sdf_raw(const Vec3& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& part : parts) d = std::min(d, part.sdf(p));
  return d;
}

double ProceduralShape::sdf(const Vec3& p) const {
  // Normalized p' = (p - c) * s, so p = p' / s + c and distances scale by s.
  return normalization.scale * sdf_raw(p / normalization.scale + normalization.center);
}

bool ProceduralShape::has_region(RegionId id) const {
  return std::find(regions.begin(), regions.end(), id) != regions.end();
}

ProceduralShape build_shape(ShapeKind kind, const ShapeParams& params) {
  for (const auto& [key, value] : params) {
    require(std::isfinite(value) && value > 0.0, "shape params: " + key + " must be positive");
  }
  ProceduralShape s;
  s.kind = kind;
  s.params = params;
  using region::kBlade, region::kBody, region::kCap, region::kHandle, region::kHead,
      region::kLid, region::kNeck, region::kSpout;
  switch (kind) {
    case ShapeKind::Mug: {
      const double rb = get(params, "body_radius"), h = get(params, "body_height");
      const double R = get(params, "handle_major"), r = get(params, "handle_minor");
      require(r < 0.5 * R, "mug: handle_minor must be < handle_major / 2");
      require(2.0 * (R + r) < h, "mug: handle taller than body");
      s.parts.push_back(Primitive::cylinder(kBody, Vec3::Zero(), rb, 0.5 * h));
      s.parts.push_back(
          Primitive::torus_arc(kHandle, Vec3(rb, 0, 0), R, r, deg(-110), deg(110), xz_plane()));
      s.regions = {kBody, kHandle};
      break;
    }
    case ShapeKind::Hammer: {
      const double L = get(params, "handle_length"), r = get(params, "handle_radius");
      const double hl = get(params, "head_length"), hw = get(params, "head_width");
      require(hw > 2.0 * r, "hammer: head narrower than handle");
      s.parts.push_back(Primitive::capsule(kHandle, Vec3(0, 0, -L), Vec3::Zero(), r));
      s.parts.push_back(Primitive::box(kHead, Vec3(0, 0, 0.5 * hw),
                                       Vec3(0.5 * hl, 0.5 * hw, 0.5 * hw)));
      s.regions = {kHandle, kHead};
      break;
    }
    case ShapeKind::Bottle: {
      const double rb = get(params, "body_radius"), hb = get(params, "body_height");
      const double rn = get(params, "neck_radius"), hn = get(params, "neck_height");
      const double rc = get(params, "cap_radius"), hc = get(params, "cap_height");
      require(rn < rb && rc < rb, "bottle: neck and cap must be narrower than the body");
      s.parts.push_back(Primitive::cylinder(kBody, Vec3::Zero(), rb, 0.5 * hb));
      s.parts.push_back(Primitive::cylinder(kNeck, Vec3(0, 0, 0.5 * (hb + hn)), rn, 0.5 * hn));
      s.parts.push_back(
          Primitive::cylinder(kCap, Vec3(0, 0, 0.5 * hb + hn + 0.5 * hc), rc, 0.5 * hc));
      s.regions = {kBody, kNeck, kCap};
      break;
    }
    case ShapeKind::Pan: {
      const double rb = get(params, "body_radius"), hb = get(params, "body_height");
      const double L = get(params, "handle_length"), r = get(params, "handle_radius");
      require(r < 0.5 * hb, "pan: handle thicker than the body");
      s.parts.push_back(Primitive::cylinder(kBody, Vec3::Zero(), rb, 0.5 * hb));
      s.parts.push_back(Primitive::capsule(kHandle, Vec3(0.9 * rb, 0, 0.25 * hb),
                                           Vec3(rb + L, 0, 0.25 * hb + 0.15 * L), r));
      s.regions = {kBody, kHandle};
      break;
    }
    case ShapeKind::Knife: {
      const double L = get(params, "handle_length"), r = get(params, "handle_radius");
      const double bl = get(params, "blade_length"), bw = get(params, "blade_width");
      const double bt = get(params, "blade_thickness");
      require(bt < 2.0 * r, "knife: blade thicker than the handle");
      s.parts.push_back(Primitive::capsule(kHandle, Vec3(0, 0, -L), Vec3::Zero(), r));
      s.parts.push_back(
          Primitive::box(kBlade, Vec3(0, 0, 0.5 * bl), Vec3(0.5 * bw, 0.5 * bt, 0.5 * bl)));
      s.regions = {kHandle, kBlade};
      break;
    }
    case ShapeKind::Teapot: {
      const double rb = get(params, "body_radius");
      const double sl = get(params, "spout_length"), sr = get(params, "spout_radius");
      const double R = get(params, "handle_major"), r = get(params, "handle_minor");
      const double lr = get(params, "lid_radius"), lh = get(params, "lid_height");
      require(r < 0.5 * R && lr < rb && sr < 0.5 * rb, "teapot: inconsistent dimensions");
      s.parts.push_back(Primitive::sphere(kBody, Vec3::Zero(), rb));
      const Vec3 dir = Vec3(1.0, 0.0, 0.7).normalized();
      s.parts.push_back(Primitive::capsule(kSpout, 0.7 * rb * dir, (0.7 * rb + sl) * dir, sr));
      s.parts.push_back(
          Primitive::torus_arc(kHandle, Vec3(-rb, 0, 0), R, r, deg(70), deg(290), xz_plane()));
      s.parts.push_back(Primitive::cylinder(kLid, Vec3(0, 0, rb * 0.95), lr, 0.5 * lh));
      s.regions = {kBody, kSpout, kHandle, kLid};
      break;
    }
  }
  return s;
}

GeneratedShape generate_shape(ShapeKind kind, const ShapeParams& params, std::size_t density,
                              std::uint64_t seed) {
  require(density >= 256, "generate_shape: density must be >= 256");
  GeneratedShape g;
  g.shape = build_shape(kind, params);
  const auto& parts = g.shape.parts;

  std::vector<double> cum;
  double total = 0.0;
  for (const auto& p : parts) cum.push_back(total += p.area());

  Rng rng(derive_seed(seed, "shape-surface"));
  PointCloud raw;
  raw.points.reserve(density);
  raw.labels.reserve(density);
  while (raw.size() < density) {
    const double u = uniform(rng, 0.0, total);
    const std::size_t i = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin(),
                                 static_cast<std::ptrdiff_t>(parts.size()) - 1));
    const Vec3 p = parts[i].sample_surface(rng);
    bool covered = false;
    for (std::size_t j = 0; j < parts.size() && !covered; ++j) {
      covered = j != i && parts[j].sdf(p) <= 0.0;
    }
    if (!covered) raw.push_back(p, parts[i].region);
  }
  g.shape.raw_diagonal = bounding_box(raw).diagonal();
  g.shape.normalization = unit_diagonal_normalization(raw);
  g.cloud = apply(g.shape.normalization, raw);
  return g;
}

}  // namespace tosc
