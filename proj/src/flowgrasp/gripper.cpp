#include "tosc/flowgrasp/gripper.hpp"

#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kMinNorm = 1e-9;

struct Frame6d {
  Vec3 b1, b2, b3;
  std::array<Mat3, 6> d;  // d[k] = dR / d r6[k], columns b1 b2 b3
};

Frame6d frame_with_derivatives(const Eigen::Ref<const Eigen::VectorXd>& r6) {
  const Vec3 a1 = r6.segment<3>(0), a2 = r6.segment<3>(3);
  const double n1 = a1.norm();
  if (!(n1 > kMinNorm)) fail(ErrorCode::DegenerateGeometry, "rotation_from_6d: zero first column");
  Frame6d f;
  f.b1 = a1 / n1;
  const Vec3 u2 = a2 - f.b1.dot(a2) * f.b1;
  const double n2 = u2.norm();
  if (!(n2 > kMinNorm * std::max(1.0, a2.norm()))) {
    fail(ErrorCode::DegenerateGeometry, "rotation_from_6d: parallel columns");
  }
  f.b2 = u2 / n2;
  f.b3 = f.b1.cross(f.b2);
  const Mat3 p1 = (Mat3::Identity() - f.b1 * f.b1.transpose()) / n1;
  const Mat3 p2 = (Mat3::Identity() - f.b2 * f.b2.transpose()) / n2;
  for (int k = 0; k < 6; ++k) {
    Vec3 da1 = Vec3::Zero(), da2 = Vec3::Zero();
    (k < 3 ? da1 : da2)[k % 3] = 1.0;
    const Vec3 db1 = p1 * da1;
    const Vec3 du2 = da2 - (db1.dot(a2) + f.b1.dot(da2)) * f.b1 - f.b1.dot(a2) * db1;
    const Vec3 db2 = p2 * du2;
    const Vec3 db3 = db1.cross(f.b2) + f.b1.cross(db2);
    f.d[static_cast<std::size_t>(k)].col(0) = db1;
    f.d[static_cast<std::size_t>(k)].col(1) = db2;
    f.d[static_cast<std::size_t>(k)].col(2) = db3;
  }
  return f;
}

Vec3 link_dir(const Vec3& u, double a) { return std::cos(a) * Vec3::UnitZ() - std::sin(a) * u; }
Vec3 link_dir_d(const Vec3& u, double a) { return -std::sin(a) * Vec3::UnitZ() - std::cos(a) * u; }

// Palm-local point on a finger: link 0 or 1 at fraction s, with derivatives
// w.r.t. the finger's two joint angles.
struct LocalPoint {
  Vec3 p, d1, d2;
};

LocalPoint finger_point(const GripperModel& g, int finger, int link, double s, double t1,
                        double t2) {
  const double phi = kTwoPi * finger / g.fingers;
  const Vec3 u(std::cos(phi), std::sin(phi), 0.0);
  const Vec3 base = g.palm_radius * u;
  LocalPoint lp;
  if (link == 0) {
    lp.p = base + s * g.link1 * link_dir(u, t1);
    lp.d1 = s * g.link1 * link_dir_d(u, t1);
    lp.d2 = Vec3::Zero();
  } else {
    lp.p = base + g.link1 * link_dir(u, t1) + s * g.link2 * link_dir(u, t1 + t2);
    lp.d2 = s * g.link2 * link_dir_d(u, t1 + t2);
    lp.d1 = g.link1 * link_dir_d(u, t1) + lp.d2;
  }
  return lp;
}

void push_point(HandPoints& out, const GripperModel& g, const Frame6d& f, const Mat3& r,
                const Vec3& t, const Vec3& local, const Vec3& dl1, const Vec3& dl2, int j1,
                double radius) {
  out.points.push_back(r * local + t);
  out.radii.push_back(radius);
  Jacobian jac = Jacobian::Zero(3, g.dim());
  jac.leftCols<3>().setIdentity();
  for (int k = 0; k < 6; ++k) jac.col(3 + k) = f.d[static_cast<std::size_t>(k)] * local;
  if (j1 >= 0) {
    jac.col(9 + j1) = r * dl1;
    jac.col(9 + j1 + 1) = r * dl2;
  }
  out.jacobians.push_back(std::move(jac));
}

HandPoints hand_points(const GripperModel& g, const GraspVector& x, bool tips_only) {
  g.validate();
  require(x.size() == g.dim(), "grasp vector has the wrong dimension");
  require(x.allFinite(), "grasp vector is not finite");
  const Frame6d f = frame_with_derivatives(x.segment<6>(3));
  Mat3 r;
  r << f.b1, f.b2, f.b3;
  const Vec3 t = x.head<3>();
  HandPoints out;
  if (!tips_only) push_point(out, g, f, r, t, Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), -1, g.palm_sphere_radius);
  for (int fi = 0; fi < g.fingers; ++fi) {
    const int j1 = 2 * fi;
    const double t1 = x[9 + j1], t2 = x[9 + j1 + 1];
    if (!tips_only) {
      for (auto [link, s] : {std::pair{0, 0.0}, {0, 0.5}, {0, 1.0}, {1, 0.5}}) {
        auto lp = finger_point(g, fi, link, s, t1, t2);
        push_point(out, g, f, r, t, lp.p, lp.d1, lp.d2, j1, g.link_radius);
      }
    }
    auto tip = finger_point(g, fi, 1, 1.0, t1, t2);
    push_point(out, g, f, r, t, tip.p, tip.d1, tip.d2, j1, g.tip_radius);
  }
  return out;
}

}  // namespace

void GripperModel::validate() const {
  require(fingers >= 1, "gripper: need at least one finger");
  require(palm_radius >= 0.0 && link1 > 0.0 && link2 > 0.0, "gripper: bad link lengths");
  require(tip_radius > 0.0 && link_radius > 0.0 && palm_sphere_radius > 0.0,
          "gripper: radii must be positive");
  require(joint_lo[0] < joint_hi[0] && joint_lo[1] < joint_hi[1], "gripper: empty joint range");
}

Mat3 rotation_from_6d(const Eigen::Ref<const Eigen::VectorXd>& r6) {
  require(r6.size() == 6, "rotation_from_6d: expected 6 values");
  const Frame6d f = frame_with_derivatives(r6);
  Mat3 r;
  r << f.b1, f.b2, f.b3;
  return r;
}

Eigen::Matrix<double, 6, 1> rotation_to_6d(const Mat3& r) {
  Eigen::Matrix<double, 6, 1> v;
  v << r.col(0), r.col(1);
  return v;
}

GraspPose decode_grasp(const GripperModel& g, const GraspVector& x) {
  require(x.size() == g.dim(), "grasp vector has the wrong dimension");
  GraspPose p;
  p.translation = x.head<3>();
  p.rotation = rotation_from_6d(x.segment<6>(3));
  p.joints = x.tail(g.joints());
  return p;
}

GraspVector encode_grasp(const GripperModel& g, const GraspPose& pose) {
  require(pose.joints.size() == g.joints(), "grasp pose has the wrong joint count");
  GraspVector x(g.dim());
  x.head<3>() = pose.translation;
  x.segment<6>(3) = rotation_to_6d(pose.rotation);
  x.tail(g.joints()) = pose.joints;
  return x;
}

HandPoints fk_fingertips(const GripperModel& g, const GraspVector& x) {
  return hand_points(g, x, true);
}

HandPoints hand_spheres(const GripperModel& g, const GraspVector& x) {
  return hand_points(g, x, false);
}

}  // namespace tosc
