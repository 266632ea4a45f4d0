#include "tosc/synth/primitives.hpp"

#include <algorithm>
#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 unit_sphere(Rng& rng) {
  Vec3 d;
  do {
    d = Vec3(normal(rng), normal(rng), normal(rng));
  } while (d.squaredNorm() < 1e-24);
  return d.normalized();
}

// Point on the hemisphere of radius r around c facing `dir`.
Vec3 hemisphere(Rng& rng, const Vec3& c, const Vec3& dir, double r) {
  Vec3 d = unit_sphere(rng);
  if (d.dot(dir) < 0.0) d = -d;
  return c + r * d;
}

double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  return a < 0.0 ? a + 2.0 * kPi : a;
}

}  // namespace

Mat3 frame_from_z(const Vec3& axis) {
  const Vec3 z = axis.normalized();
  const Vec3 helper = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 x = (helper - helper.dot(z) * z).normalized();
  Mat3 f;
  f.col(0) = x;
  f.col(1) = z.cross(x);
  f.col(2) = z;
  return f;
}

Primitive Primitive::sphere(RegionId region, const Vec3& c, double r) {
  Primitive p;
  p.type = Type::Sphere;
  p.region = region;
  p.center = c;
  p.radius = r;
  p.validate();
  return p;
}

Primitive Primitive::capsule(RegionId region, const Vec3& a, const Vec3& b, double r) {
  Primitive p;
  p.type = Type::Capsule;
  p.region = region;
  p.center = a;
  p.end = b;
  p.radius = r;
  p.validate();
  return p;
}

Primitive Primitive::box(RegionId region, const Vec3& c, const Vec3& half_extents,
                         const Mat3& frame) {
  Primitive p;
  p.type = Type::Box;
  p.region = region;
  p.center = c;
  p.half = half_extents;
  p.frame = frame;
  p.validate();
  return p;
}

Primitive Primitive::cylinder(RegionId region, const Vec3& c, double r, double half_height,
                              const Mat3& frame) {
  Primitive p;
  p.type = Type::Cylinder;
  p.region = region;
  p.center = c;
  p.radius = r;
  p.half = Vec3(r, r, half_height);
  p.frame = frame;
  p.validate();
  return p;
}

Primitive Primitive::torus_arc(RegionId region, const Vec3& c, double R, double r, double lo,
                               double hi, const Mat3& frame) {
  Primitive p;
  p.type = Type::TorusArc;
  p.region = region;
  p.center = c;
  p.major = R;
  p.radius = r;
  p.arc_lo = lo;
  p.arc_hi = hi;
  p.frame = frame;
  p.validate();
  return p;
}

void Primitive::validate() const {
  switch (type) {
    case Type::Sphere:
    case Type::Capsule:
      require(radius > 0.0, "primitive: radius must be positive");
      break;
    case Type::Box:
      require((half.array() > 0.0).all(), "primitive: box half extents must be positive");
      break;
    case Type::Cylinder:
      require(radius > 0.0 && half.z() > 0.0, "primitive: cylinder dimensions must be positive");
      break;
    case Type::TorusArc:
      require(radius > 0.0 && major > radius, "primitive: torus radii must satisfy R > r > 0");
      require(arc_hi > arc_lo && arc_hi - arc_lo <= 2.0 * kPi, "primitive: bad arc range");
      break;
  }
  require(center.allFinite() && end.allFinite(), "primitive: non-finite position");
}

double Primitive::sdf(const Vec3& p) const {
  switch (type) {
    case Type::Sphere:
      return (p - center).norm() - radius;
    case Type::Capsule: {
      const Vec3 ab = end - center;
      const double t = std::clamp((p - center).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
      return (p - (center + t * ab)).norm() - radius;
    }
    case Type::Box: {
      const Vec3 q = (frame.transpose() * (p - center)).cwiseAbs() - half;
      const double outside = q.cwiseMax(0.0).norm();
      return outside + std::min(q.maxCoeff(), 0.0);
    }
    case Type::Cylinder: {
      const Vec3 l = frame.transpose() * (p - center);
      const double dr = std::hypot(l.x(), l.y()) - radius;
      const double dz = std::abs(l.z()) - half.z();
      const double ox = std::max(dr, 0.0), oz = std::max(dz, 0.0);
      return std::hypot(ox, oz) + std::min(std::max(dr, dz), 0.0);
    }
    case Type::TorusArc: {
      const Vec3 l = frame.transpose() * (p - center);
      const double phi = std::atan2(l.y(), l.x());
      // Angular distance into the arc range, handling the 2*pi wrap.
      const double span = arc_hi - arc_lo;
      const double rel = wrap_angle(phi - arc_lo);
      Vec3 nearest;
      if (rel <= span) {
        const double rho = std::hypot(l.x(), l.y());
        if (rho < 1e-300) {
          nearest = Vec3(major * std::cos(arc_lo), major * std::sin(arc_lo), 0.0);
        } else {
          nearest = Vec3(major * l.x() / rho, major * l.y() / rho, 0.0);
        }
      } else {
        const Vec3 a(major * std::cos(arc_lo), major * std::sin(arc_lo), 0.0);
        const Vec3 b(major * std::cos(arc_hi), major * std::sin(arc_hi), 0.0);
        nearest = (l - a).squaredNorm() <= (l - b).squaredNorm() ? a : b;
      }
      return (l - nearest).norm() - radius;
    }
  }
  return 0.0;
}

double Primitive::area() const {
  switch (type) {
    case Type::Sphere:
      return 4.0 * kPi * radius * radius;
    case Type::Capsule:
      return 2.0 * kPi * radius * (end - center).norm() + 4.0 * kPi * radius * radius;
    case Type::Box:
      return 8.0 * (half.x() * half.y() + half.y() * half.z() + half.x() * half.z());
    case Type::Cylinder:
      return 2.0 * kPi * radius * 2.0 * half.z() + 2.0 * kPi * radius * radius;
    case Type::TorusArc:
      return 2.0 * kPi * radius * major * (arc_hi - arc_lo) + 4.0 * kPi * radius * radius;
  }
  return 0.0;
}

Vec3 Primitive::sample_surface(Rng& rng) const {
  switch (type) {
    case Type::Sphere:
      return center + radius * unit_sphere(rng);
    case Type::Capsule: {
      const Vec3 ab = end - center;
      const double len = ab.norm();
      const double side = 2.0 * kPi * radius * len;
      const double u = uniform(rng, 0.0, side + 4.0 * kPi * radius * radius);
      const Mat3 f = frame_from_z(ab);
      if (u < side) {
        const double th = uniform(rng, 0.0, 2.0 * kPi);
        return center + uniform(rng) * ab +
               radius * (std::cos(th) * f.col(0) + std::sin(th) * f.col(1));
      }
      return uniform(rng) < 0.5 ? hemisphere(rng, center, -ab, radius)
                                : hemisphere(rng, end, ab, radius);
    }
    case Type::Box: {
      const double axy = half.x() * half.y(), ayz = half.y() * half.z(), axz = half.x() * half.z();
      const double u = uniform(rng, 0.0, axy + ayz + axz);
      const double s = uniform(rng) < 0.5 ? -1.0 : 1.0;
      const double a = uniform(rng, -1.0, 1.0), b = uniform(rng, -1.0, 1.0);
      Vec3 l;
      if (u < axy) {
        l = Vec3(a * half.x(), b * half.y(), s * half.z());
      } else if (u < axy + ayz) {
        l = Vec3(s * half.x(), a * half.y(), b * half.z());
      } else {
        l = Vec3(a * half.x(), s * half.y(), b * half.z());
      }
      return center + frame * l;
    }
    case Type::Cylinder: {
      const double side = 2.0 * kPi * radius * 2.0 * half.z();
      const double u = uniform(rng, 0.0, side + 2.0 * kPi * radius * radius);
      const double th = uniform(rng, 0.0, 2.0 * kPi);
      Vec3 l;
      if (u < side) {
        l = Vec3(radius * std::cos(th), radius * std::sin(th), uniform(rng, -half.z(), half.z()));
      } else {
        const double rr = radius * std::sqrt(uniform(rng));
        l = Vec3(rr * std::cos(th), rr * std::sin(th), uniform(rng) < 0.5 ? -half.z() : half.z());
      }
      return center + frame * l;
    }
    case Type::TorusArc: {
      const double tube = 2.0 * kPi * radius * major * (arc_hi - arc_lo);
      const double u = uniform(rng, 0.0, tube + 4.0 * kPi * radius * radius);
      auto on_arc = [&](double phi) { return Vec3(major * std::cos(phi), major * std::sin(phi), 0.0); };
      auto tangent = [&](double phi) { return Vec3(-std::sin(phi), std::cos(phi), 0.0); };
      Vec3 l;
      if (u < tube) {
        // Area element (R + r cos(theta)) r dtheta dphi: rejection on theta.
        double th;
        do {
          th = uniform(rng, 0.0, 2.0 * kPi);
        } while (uniform(rng, 0.0, major + radius) > major + radius * std::cos(th));
        const double phi = uniform(rng, arc_lo, arc_hi);
        const Vec3 radial(std::cos(phi), std::sin(phi), 0.0);
        l = on_arc(phi) + radius * (std::cos(th) * radial + std::sin(th) * Vec3::UnitZ());
      } else if (uniform(rng) < 0.5) {
        l = hemisphere(rng, on_arc(arc_lo), -tangent(arc_lo), radius);
      } else {
        l = hemisphere(rng, on_arc(arc_hi), tangent(arc_hi), radius);
      }
      return center + frame * l;
    }
  }
  return center;
}

}  // namespace tosc
