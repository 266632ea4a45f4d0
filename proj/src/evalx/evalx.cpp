#include "tosc/evalx/evalx.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/geom/metrics.hpp"

namespace tosc {

using nlohmann::json;

namespace {

Vec3 sdf_normal(const Solid& s, const Vec3& p) {
  constexpr double h = 1e-6;
  Vec3 g;
  for (int k = 0; k < 3; ++k) {
    Vec3 a = p, b = p;
    a[k] += h;
    b[k] -= h;
    g[k] = (s.sdf(a) - s.sdf(b)) / (2.0 * h);
  }
  const double n = g.norm();
  return n > 0.0 ? Vec3(g / n) : Vec3::UnitZ();
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  const double golden = 3.141592653589793 * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.emplace_back(r * std::cos(golden * i), r * std::sin(golden * i), z);
  }
  return out;
}

}  // namespace

void Solid::validate() const {
  require(static_cast<bool>(sdf), "solid: missing signed distance");
  require(bounds.diagonal() > 0.0 && std::isfinite(bounds.diagonal()), "solid: empty bounds");
  require(units_to_cm > 0.0, "solid: units_to_cm must be positive");
}

Solid solid_from_shape(const ProceduralShape& shape, const PointCloud& surface) {
  require(!surface.empty(), "solid_from_shape: empty surface cloud");
  Solid s;
  const ProceduralShape* sp = &shape;
  s.sdf = [sp](const Vec3& p) { return sp->sdf(p); };
  s.bounds = bounding_box(surface);
  s.units_to_cm = shape.raw_diagonal * 100.0;
  return s;
}

PenetrationResult penetration(const std::vector<Vec3>& centers, const std::vector<double>& radii,
                              const Solid& solid, const PenetrationConfig& cfg) {
  solid.validate();
  if (!solid.watertight) fail(ErrorCode::UnsupportedObject, "penetration: solid is not watertight");
  require(centers.size() == radii.size(), "penetration: centers and radii differ in length");
  const double vs = cfg.voxel_size > 0.0 ? cfg.voxel_size : cfg.voxel_fraction * solid.bounds.diagonal();
  require(vs > 0.0, "penetration: voxel size must be positive");
  require(cfg.surface_samples >= 1, "penetration: surface_samples must be >= 1");

  std::vector<std::array<long, 3>> cells;
  double depth = 0.0;
  const auto dirs = fibonacci_sphere(cfg.surface_samples);
  for (std::size_t s = 0; s < centers.size(); ++s) {
    const Vec3& c = centers[s];
    const double r = radii[s];
    require(r > 0.0, "penetration: radius must be positive");
    if (solid.sdf(c) >= r + vs) continue;  // sphere clear of the solid
    depth = std::max(depth, -solid.sdf(c));
    for (const auto& d : dirs) depth = std::max(depth, -solid.sdf(c + r * d));
    std::array<long, 3> lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo[k] = static_cast<long>(std::floor((c[k] - r) / vs));
      hi[k] = static_cast<long>(std::floor((c[k] + r) / vs));
    }
    for (long i = lo[0]; i <= hi[0]; ++i) {
      for (long j = lo[1]; j <= hi[1]; ++j) {
        for (long k = lo[2]; k <= hi[2]; ++k) {
          const Vec3 v((i + 0.5) * vs, (j + 0.5) * vs, (k + 0.5) * vs);
          if ((v - c).squaredNorm() <= r * r && solid.sdf(v) < 0.0) cells.push_back({i, j, k});
        }
      }
    }
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  PenetrationResult out;
  const double edge = vs * solid.units_to_cm;
  out.volume_cm3 = static_cast<double>(cells.size()) * edge * edge * edge;
  out.depth_cm = std::max(0.0, depth) * solid.units_to_cm;
  return out;
}

PenetrationResult penetration(const GripperModel& g, const GraspVector& x, const Solid& solid,
                              const PenetrationConfig& cfg) {
  const HandPoints hand = hand_spheres(g, x);
  return penetration(hand.points, hand.radii, solid, cfg);
}

int fingertip_contacts(const GripperModel& g, const GraspVector& x, const Solid& solid,
                       double threshold) {
  solid.validate();
  int n = 0;
  for (const auto& t : fk_fingertips(g, x).points) n += solid.sdf(t) - g.tip_radius <= threshold;
  return n;
}

double contact_ratio(const GripperModel& g, const std::vector<GraspCase>& grasps,
                     const ContactConfig& cfg) {
  require(!grasps.empty(), "contact_ratio: empty batch");
  require(cfg.threshold > 0.0, "contact_ratio: threshold must be positive");
  int ok = 0;
  for (const auto& gc : grasps) {
    require(gc.solid != nullptr, "contact_ratio: grasp without a solid");
    if (fingertip_contacts(g, gc.x, *gc.solid, cfg.threshold) == 0) continue;
    PenetrationConfig pc;
    if (penetration(g, gc.x, *gc.solid, pc).depth_cm <= cfg.depth_tolerance_cm) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(grasps.size());
}

double task_contact_distance(const GripperModel& g, const GraspVector& x, const PointCloud& task,
                             const KdTree& task_tree) {
  require(!task.empty() && task_tree.size() == task.size(), "task_contact_distance: bad task cloud");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : fk_fingertips(g, x).points) {
    best = std::min(best, std::max(0.0, std::sqrt(task_tree.nearest(t).sq_dist) - g.tip_radius));
  }
  return best;
}

std::vector<Vec3> default_probes() {
  return {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY(),
          Vec3::UnitZ(), -Vec3::UnitZ(), -Vec3::UnitZ()};
}

namespace {

// Equilibrium translation (cm) of the object under external force f.
Vec3 equilibrium(const std::vector<ContactPoint>& contacts, const Vec3& f,
                 const DisplacementConfig& cfg) {
  const double k = cfg.stiffness;
  if (contacts.empty()) {
    const double n = f.norm();
    return n > 0.0 ? Vec3(f * (cfg.d_max_cm / n)) : Vec3::Zero();
  }
  const double eta = 1.0 / (2.0 * k * static_cast<double>(contacts.size()));
  Vec3 d = Vec3::Zero();
  for (int it = 0; it < cfg.steps; ++it) {
    Vec3 net = f;
    for (const auto& c : contacts) {
      const double dn = d.dot(c.normal);
      const double fn = std::max(0.0, cfg.preload + k * dn);
      net -= fn * c.normal;
      const Vec3 dt = d - dn * c.normal;
      const double tn = dt.norm();
      if (tn > 0.0) net -= std::min(k * tn, cfg.mu * fn) * (dt / tn);
    }
    d += eta * net;
    const double dn = d.norm();
    if (dn > cfg.d_max_cm) d *= cfg.d_max_cm / dn;
  }
  return d;
}

}  // namespace

DisplacementResult displacement_from_contacts(const std::vector<ContactPoint>& contacts,
                                              double units_to_cm, const std::vector<Vec3>& probes,
                                              const DisplacementConfig& cfg) {
  require(!probes.empty(), "grasp_displacement: need at least one probe");
  require(cfg.mu >= 0.0 && cfg.d_max_cm > 0.0 && cfg.steps >= 1 && cfg.stiffness > 0.0 &&
              cfg.preload >= 0.0 && units_to_cm > 0.0,
          "grasp_displacement: bad configuration");
  DisplacementResult out;
  out.contacts = static_cast<int>(contacts.size());
  const Vec3 rest = equilibrium(contacts, Vec3::Zero(), cfg);
  for (const auto& p : probes) {
    const double m = std::min(cfg.d_max_cm, (equilibrium(contacts, p, cfg) - rest).norm());
    out.per_probe_cm.push_back(contacts.empty() ? cfg.d_max_cm : m);
  }
  const double n = static_cast<double>(out.per_probe_cm.size());
  for (double v : out.per_probe_cm) out.mean_cm += v / n;
  for (double v : out.per_probe_cm) out.var_cm += (v - out.mean_cm) * (v - out.mean_cm) / n;
  return out;
}

DisplacementResult grasp_displacement(const GripperModel& g, const GraspVector& x,
                                      const Solid& solid, const std::vector<Vec3>& probes,
                                      const DisplacementConfig& cfg) {
  solid.validate();
  std::vector<ContactPoint> contacts;
  for (const auto& t : fk_fingertips(g, x).points) {
    const double gap = solid.sdf(t) - g.tip_radius;
    if (gap <= cfg.contact_threshold) contacts.push_back({t, sdf_normal(solid, t), gap});
  }
  return displacement_from_contacts(contacts, solid.units_to_cm, probes, cfg);
}

GraspEvalReport evaluate_grasp(const GripperModel& g, const GraspVector& x, const Solid& solid,
                               const PointCloud& task, const KdTree& task_tree,
                               const ContactConfig& contact, const DisplacementConfig& disp,
                               const PenetrationConfig& pen) {
  GraspEvalReport r;
  const auto p = penetration(g, x, solid, pen);
  r.penetration_volume = p.volume_cm3;
  r.penetration_depth = p.depth_cm;
  r.contact_count = fingertip_contacts(g, x, solid, contact.threshold);
  r.contact = r.contact_count > 0 && p.depth_cm <= contact.depth_tolerance_cm;
  const auto d = grasp_displacement(g, x, solid, default_probes(), disp);
  r.displacement_mean = d.mean_cm;
  r.displacement_var = d.var_cm;
  r.task_distance = task_contact_distance(g, x, task, task_tree);
  return r;
}

CompletionReport completion_report(const PointCloud& pred, const PointCloud& gt) {
  CompletionReport r;
  r.cd_l2 = chamfer(pred, gt, ChamferVariant::L2);
  r.fscore = fscore(pred, gt, default_fscore_tau(gt));
  r.dcd = dcd(pred, gt);
  return r;
}

double task_region_chamfer(const PointCloud& pred, const PointCloud& gt,
                           const std::vector<std::size_t>& gt_task) {
  require(!pred.empty() && !gt.empty(), "task_region_chamfer: empty cloud");
  require(!gt_task.empty(), "task_region_chamfer: empty task region");
  std::vector<bool> in_task(gt.size(), false);
  for (auto i : gt_task) {
    require(i < gt.size(), "task_region_chamfer: index out of range");
    in_task[i] = true;
  }
  const PointCloud task = gt.subset(gt_task);
  const KdTree pred_tree(pred.points), gt_tree(gt.points), task_tree(task.points);
  double to_pred = 0.0;
  for (const auto& a : task.points) to_pred += pred_tree.nearest(a).sq_dist;
  to_pred /= static_cast<double>(task.size());
  double to_task = 0.0;
  std::size_t n = 0;
  for (const auto& p : pred.points) {
    if (!in_task[gt_tree.nearest(p).index]) continue;
    to_task += task_tree.nearest(p).sq_dist;
    ++n;
  }
  return to_pred + (n > 0 ? to_task / static_cast<double>(n) : 0.0);
}

void write_grasp_reports_csv(const std::filesystem::path& path,
                             const std::vector<GraspEvalReport>& rows) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
  f.precision(10);
  f << "index,penetration_volume_cm3,penetration_depth_cm,contact,contact_count,"
       "displacement_mean_cm,displacement_var,task_distance\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    f << i << ',' << r.penetration_volume << ',' << r.penetration_depth << ',' << (r.contact ? 1 : 0)
      << ',' << r.contact_count << ',' << r.displacement_mean << ',' << r.displacement_var << ','
      << r.task_distance << '\n';
  }
}

std::string grasp_summary_json(const std::vector<GraspEvalReport>& rows, double task_threshold) {
  json j;
  double vol = 0, depth = 0, dm = 0, dv = 0, contact = 0, task = 0, task_dist = 0;
  for (const auto& r : rows) {
    vol += r.penetration_volume;
    depth += r.penetration_depth;
    dm += r.displacement_mean;
    dv += r.displacement_var;
    contact += r.contact;
    task += r.task_distance <= task_threshold;
    task_dist += r.task_distance;
  }
  const double d = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  j["count"] = rows.size();
  j["Penetration Volume"] = vol / d;
  j["Penetration Depth"] = depth / d;
  j["Grasp Displace Mean"] = dm / d;
  j["Grasp Displace Var"] = dv / d;
  j["Contact Ratio"] = contact / d;
  j["task_contact_ratio"] = task / d;
  j["task_contact_threshold"] = task_threshold;
  j["mean_task_distance"] = task_dist / d;
  return j.dump(2);
}

std::string completion_summary_json(const std::vector<CompletionReport>& rows) {
  json j;
  const double d = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  double cd = 0, fs = 0, dc = 0;
  for (const auto& r : rows) {
    cd += r.cd_l2;
    fs += r.fscore;
    dc += r.dcd;
  }
  j["count"] = rows.size();
  j["CD-l2 x1e-4"] = cd / d * 1e4;
  j["F-Score@1"] = fs / d;
  j["DCD"] = dc / d;
  return j.dump(2);
}

}  // namespace tosc
