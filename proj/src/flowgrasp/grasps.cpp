#include "tosc/flowgrasp/grasps.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/common/rng.hpp"
#include "tosc/flowgrasp/constraints.hpp"
#include "tosc/geom/kdtree.hpp"

namespace tosc {

using nlohmann::json;

namespace {

Vec3 sdf_gradient(const ProceduralShape& shape, const Vec3& p) {
  constexpr double h = 1e-6;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 a = p, b = p;
    a[k] += h;
    b[k] -= h;
    g[k] = (shape.sdf(a) - shape.sdf(b)) / (2.0 * h);
  }
  return g;
}

Mat3 frame_with_z(const Vec3& z, double roll) {
  const Vec3 zz = z.normalized();
  const Vec3 helper = std::abs(zz.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 x0 = (helper - helper.dot(zz) * zz).normalized();
  const Vec3 y0 = zz.cross(x0);
  Mat3 r;
  r.col(0) = std::cos(roll) * x0 + std::sin(roll) * y0;
  r.col(1) = zz.cross(r.col(0));
  r.col(2) = zz;
  return r;
}

}  // namespace

OracleEnergy oracle_energy(const GripperModel& g, const GraspVector& x, const ProceduralShape& shape,
                           const KdTree& task_tree, const PointCloud& task,
                           const OracleGraspConfig& cfg) {
  OracleEnergy e{0.0, Eigen::VectorXd::Zero(g.dim())};
  const HandPoints hand = hand_spheres(g, x);
  for (std::size_t s = 0; s < hand.points.size(); ++s) {
    const double gap = hand.radii[s] - shape.sdf(hand.points[s]);
    if (gap <= 0.0) continue;
    e.value += cfg.w_penetration * gap * gap;
    e.grad -= cfg.w_penetration * 2.0 * gap * (hand.jacobians[s].transpose() * sdf_gradient(shape, hand.points[s]));
  }
  const HandPoints tips = fk_fingertips(g, x);
  for (std::size_t f = 0; f < tips.points.size(); ++f) {
    const auto nn = task_tree.nearest(tips.points[f]);
    const double d = std::sqrt(nn.sq_dist);
    const double gap = d - g.tip_radius;
    if (gap <= 0.0 || d == 0.0) continue;
    e.value += cfg.w_contact * gap * gap;
    const Vec3 dir = (tips.points[f] - task.points[nn.index]) / d;
    e.grad += cfg.w_contact * 2.0 * gap * (tips.jacobians[f].transpose() * dir);
  }
  const auto jl = constraint_joint_limits(g, x);
  e.value += cfg.w_joint_limits * jl.value;
  e.grad += cfg.w_joint_limits * jl.grad;
  // Keep the 6D columns near orthonormal so stored grasps stay well scaled.
  const Vec3 a1 = x.segment<3>(3), a2 = x.segment<3>(6);
  const double n1 = a1.norm(), n2 = a2.norm(), c = a1.dot(a2);
  e.value += (n1 - 1) * (n1 - 1) + (n2 - 1) * (n2 - 1) + c * c;
  e.grad.segment<3>(3) += 2.0 * (n1 - 1) * a1 / n1 + 2.0 * c * a2;
  e.grad.segment<3>(6) += 2.0 * (n2 - 1) * a2 / n2 + 2.0 * c * a1;
  return e;
}

std::vector<GraspVector> synthesize_grasps(const GripperModel& g, const ProceduralShape& shape,
                                           const PointCloud& task_region, std::size_t count,
                                           std::uint64_t seed, const OracleGraspConfig& cfg) {
  g.validate();
  require(!task_region.empty(), "synthesize_grasps: empty task region");
  require(cfg.iterations >= 1 && cfg.lr > 0.0 && cfg.max_attempts >= 1,
          "synthesize_grasps: bad optimizer settings");
  const KdTree tree(task_region);
  std::vector<GraspVector> out;
  const std::size_t budget = count * static_cast<std::size_t>(cfg.max_attempts);
  for (std::size_t attempt = 0; attempt < budget && out.size() < count; ++attempt) {
    Rng rng = make_rng(seed, "oracle-grasp", attempt);
    const Vec3 p = task_region.points[uniform_index(rng, task_region.size())];
    Vec3 n = sdf_gradient(shape, p);
    if (!(n.norm() > 1e-9)) continue;
    n.normalize();
    GraspPose pose;
    pose.rotation = frame_with_z(-n, uniform(rng, 0.0, 6.283185307179586));
    pose.translation = p + n * uniform(rng, 0.10, 0.16);
    pose.joints.resize(g.joints());
    for (int j = 0; j < g.joints(); ++j) pose.joints[j] = uniform(rng, 0.3, 0.9);
    GraspVector x = encode_grasp(g, pose);

    // Adam on the grasp vector.
    Eigen::VectorXd m = Eigen::VectorXd::Zero(x.size()), v = m;
    for (int it = 1; it <= cfg.iterations; ++it) {
      const OracleEnergy e = oracle_energy(g, x, shape, tree, task_region, cfg);
      m = 0.9 * m + 0.1 * e.grad;
      v = 0.999 * v + 0.001 * e.grad.cwiseProduct(e.grad);
      const double c1 = 1.0 - std::pow(0.9, it), c2 = 1.0 - std::pow(0.999, it);
      x -= cfg.lr * ((m / c1).array() / ((v / c2).array().sqrt() + 1e-8)).matrix();
    }
    GraspVector clean;
    try {
      clean = encode_grasp(g, decode_grasp(g, x));
    } catch (const Error&) {
      continue;
    }
    const HandPoints hand = hand_spheres(g, clean);
    double deepest = 0.0;
    for (std::size_t s = 0; s < hand.points.size(); ++s) {
      deepest = std::max(deepest, hand.radii[s] - shape.sdf(hand.points[s]));
    }
    int contacts = 0;
    const HandPoints tips = fk_fingertips(g, clean);
    for (const auto& tp : tips.points) {
      contacts += std::sqrt(tree.nearest(tp).sq_dist) - g.tip_radius < cfg.contact_tolerance;
    }
    bool joints_ok = true;
    for (int j = 0; j < g.joints(); ++j) {
      joints_ok &= clean[9 + j] >= g.joint_lower(j) - 0.05 && clean[9 + j] <= g.joint_upper(j) + 0.05;
    }
    if (deepest <= cfg.max_penetration && contacts >= cfg.min_contacts && joints_ok) out.push_back(clean);
  }
  return out;
}

void write_grasps(const std::filesystem::path& path, const std::vector<GraspRecord>& grasps) {
  json arr = json::array();
  for (const auto& r : grasps) {
    json x = json::array();
    for (long i = 0; i < r.x.size(); ++i) x.push_back(r.x[i]);
    arr.push_back({{"x", x}, {"gripper", r.gripper}, {"object", r.object},
                   {"task_text", r.task_text}, {"seed", r.seed}});
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
    f << std::setw(1) << json{{"format", "tosc-grasps"}, {"version", 1}, {"grasps", arr}} << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<GraspRecord> read_grasps(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot read " + path.string());
  std::vector<GraspRecord> out;
  try {
    const json j = json::parse(f);
    if (j.value("format", "") != "tosc-grasps") fail(ErrorCode::Io, "not a grasp file: " + path.string());
    for (const auto& r : j.at("grasps")) {
      GraspRecord g;
      const auto& x = r.at("x");
      g.x.resize(static_cast<long>(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) g.x[static_cast<long>(i)] = x[i].get<double>();
      g.gripper = r.value("gripper", "tri3x2");
      g.object = r.value("object", "");
      g.task_text = r.value("task_text", "");
      g.seed = r.value("seed", std::uint64_t{0});
      out.push_back(std::move(g));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, "grasp file " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace tosc
