#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tosc/flowgrasp/gripper.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/geom/point_cloud.hpp"
#include "tosc/synth/shapes.hpp"

namespace tosc {

/// Solid object for grasp evaluation, in object-normalized units.
struct Solid {
  std::function<double(const Vec3&)> sdf;
  Aabb bounds;               // must contain the solid
  bool watertight = true;
  double units_to_cm = 1.0;  // length of one normalized unit in cm

  void validate() const;
};

/// Procedural solids are watertight; units_to_cm comes from the metric size
/// and the bounds from the surface samples. The shape must outlive the solid.
Solid solid_from_shape(const ProceduralShape& shape, const PointCloud& surface);

struct PenetrationConfig {
  double voxel_fraction = 1.0 / 64.0;  // of the bounds diagonal
  double voxel_size = 0.0;             // explicit size (normalized units) when > 0
  int surface_samples = 256;           // per hand sphere, for the depth
};

struct PenetrationResult {
  double volume_cm3 = 0.0;
  double depth_cm = 0.0;
};

/// Voxels whose centers lie inside the solid and inside any hand sphere;
/// depth is the deepest sampled hand point below the surface.
PenetrationResult penetration(const GripperModel& g, const GraspVector& x, const Solid& solid,
                              const PenetrationConfig& cfg = {});
/// Same for an explicit sphere set.
PenetrationResult penetration(const std::vector<Vec3>& centers, const std::vector<double>& radii,
                              const Solid& solid, const PenetrationConfig& cfg = {});

struct ContactConfig {
  double threshold = 0.01;        // fingertip surface gap, normalized units
  double depth_tolerance_cm = 0.5;
};

/// Fingertips whose sphere surface is within threshold of the solid surface.
int fingertip_contacts(const GripperModel& g, const GraspVector& x, const Solid& solid,
                       double threshold);

struct GraspCase {
  GraspVector x;
  const Solid* solid = nullptr;
};

/// Fraction of grasps with at least one fingertip contact and penetration
/// depth within tolerance.
double contact_ratio(const GripperModel& g, const std::vector<GraspCase>& grasps,
                     const ContactConfig& cfg = {});

/// Smallest fingertip sphere-surface distance to a task-region cloud.
double task_contact_distance(const GripperModel& g, const GraspVector& x, const PointCloud& task,
                             const KdTree& task_tree);

struct DisplacementConfig {
  double mu = 0.8;
  double d_max_cm = 10.0;
  int steps = 400;
  double contact_threshold = 0.01;  // normalized units, as ContactConfig
  double stiffness = 20.0;          // object weights per cm, normal and tangential
  double preload = 1.0;             // normal force per contact, object weights
};

/// Six axis-aligned unit forces plus gravity, each of one object weight.
std::vector<Vec3> default_probes();

struct DisplacementResult {
  double mean_cm = 0.0;
  double var_cm = 0.0;  // variance over probes
  std::vector<double> per_probe_cm;
  int contacts = 0;
};

/// Quasi-static response of the held object to each probe force. Contacts
/// are fingertips within contact_threshold; each is a unilateral normal
/// spring with preload and a friction spring capped at mu times the normal
/// force. The equilibrium translation is found by projected gradient steps
/// inside the d_max ball; the zero-force equilibrium is subtracted.
DisplacementResult grasp_displacement(const GripperModel& g, const GraspVector& x,
                                      const Solid& solid, const std::vector<Vec3>& probes,
                                      const DisplacementConfig& cfg = {});

/// Contact points (normalized units) with outward normals, for fixtures.
struct ContactPoint {
  Vec3 position;
  Vec3 normal;
  double gap = 0.0;  // sphere-surface gap, normalized units
};
DisplacementResult displacement_from_contacts(const std::vector<ContactPoint>& contacts,
                                              double units_to_cm, const std::vector<Vec3>& probes,
                                              const DisplacementConfig& cfg = {});

struct GraspEvalReport {
  double penetration_volume = 0.0;  // cm^3
  double penetration_depth = 0.0;   // cm
  bool contact = false;
  int contact_count = 0;
  double displacement_mean = 0.0;  // cm
  double displacement_var = 0.0;
  double task_distance = 0.0;  // normalized units
};

GraspEvalReport evaluate_grasp(const GripperModel& g, const GraspVector& x, const Solid& solid,
                               const PointCloud& task, const KdTree& task_tree,
                               const ContactConfig& contact = {},
                               const DisplacementConfig& disp = {},
                               const PenetrationConfig& pen = {});

struct CompletionReport {
  double cd_l2 = 0.0;
  double fscore = 0.0;
  double dcd = 0.0;
  double cd_l2_x1e4() const { return cd_l2 * 1e4; }
};

/// CD-l2, F-Score@1 (tau = 1% of the gt diagonal) and DCD, via geom metrics.
CompletionReport completion_report(const PointCloud& pred, const PointCloud& gt);

/// Squared-distance chamfer restricted to the ground-truth task region A:
/// mean over A of the squared distance to pred, plus mean over the pred
/// points whose nearest ground-truth point lies in A of the squared distance
/// to A (that term is 0 when there are none). Needs no labels on pred.
double task_region_chamfer(const PointCloud& pred, const PointCloud& gt,
                           const std::vector<std::size_t>& gt_task);

void write_grasp_reports_csv(const std::filesystem::path& path,
                             const std::vector<GraspEvalReport>& rows);
/// Aggregate JSON: Table-1 style grasp columns plus counts.
std::string grasp_summary_json(const std::vector<GraspEvalReport>& rows, double task_threshold);
std::string completion_summary_json(const std::vector<CompletionReport>& rows);

}  // namespace tosc
