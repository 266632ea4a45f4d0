#include "tosc/synth/partial.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/geom/visibility.hpp"
#include "tosc/synth/shapes.hpp"

namespace tosc {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 random_direction(Rng& rng) {
  Vec3 d;
  do {
    d = Vec3(normal(rng), normal(rng), normal(rng));
  } while (d.squaredNorm() < 1e-24);
  return d.normalized();
}

double segment_distance_sq(const Vec3& c, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((c - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (c - (a + t * ab)).squaredNorm();
}

}  // namespace

Vec3 random_viewpoint(const PointCloud& cloud, Rng& rng, double distance) {
  require(!cloud.empty(), "random_viewpoint: empty cloud");
  return centroid(cloud.points) + distance * random_direction(rng);
}

PointCloud render_partial(const PointCloud& shape_cloud, const Vec3& viewpoint,
                          double noise_sigma, int occluder_count, std::uint64_t seed) {
  require(!shape_cloud.empty(), "render_partial: empty cloud");
  require(noise_sigma >= 0.0 && occluder_count >= 0, "render_partial: bad noise/occluders");
  const Aabb box = bounding_box(shape_cloud);
  require(!box.contains(viewpoint), "render_partial: viewpoint inside the object bounding box");

  Rng rng(derive_seed(seed, "render-partial"));
  std::vector<std::size_t> kept = hpr_visible(shape_cloud, viewpoint);
  const double diag = box.diagonal();

  for (int o = 0; o < occluder_count && !kept.empty(); ++o) {
    // Sphere on the sight line of a visible point, so it always hides something.
    const Vec3 q = shape_cloud.points[kept[uniform_index(rng, kept.size())]];
    const Vec3 c = viewpoint + uniform(rng, 0.4, 0.85) * (q - viewpoint);
    const double r = std::min(uniform(rng, 0.04, 0.1) * diag, 0.5 * (c - viewpoint).norm());
    const double r2 = r * r;
    std::vector<std::size_t> next;
    for (std::size_t i : kept) {
      if (segment_distance_sq(c, shape_cloud.points[i], viewpoint) >= r2) next.push_back(i);
    }
    kept.swap(next);
  }

  PointCloud out = shape_cloud.subset(kept);
  if (noise_sigma > 0.0) {
    for (auto& p : out.points) {
      Vec3 e;
      do {
        e = Vec3(normal(rng), normal(rng), normal(rng));
      } while (e.norm() > 3.0);
      p += noise_sigma * e;
    }
  }
  return out;
}

std::string to_string(SabotageOp op) {
  switch (op) {
    case SabotageOp::RemoveTaskRegion: return "remove_task_region";
    case SabotageOp::AddNoise: return "add_noise";
    case SabotageOp::PerturbPatches: return "perturb_patches";
  }
  return "";
}

SabotageOp sabotage_op_from_string(const std::string& s) {
  for (auto op : {SabotageOp::RemoveTaskRegion, SabotageOp::AddNoise, SabotageOp::PerturbPatches}) {
    if (to_string(op) == s) return op;
  }
  fail(ErrorCode::InvalidArgument, "unknown sabotage op: " + s);
}

SabotageResult sabotage(const PointCloud& sample, const TaskSpec& task,
                        const std::vector<SabotageOp>& ops, std::uint64_t seed) {
  require(!ops.empty(), "sabotage: empty op set");
  require(!sample.empty(), "sabotage: empty cloud");
  const RegionId target = region_from_name(task.target_region);
  const auto has = [&](SabotageOp op) { return std::find(ops.begin(), ops.end(), op) != ops.end(); };
  if (has(SabotageOp::RemoveTaskRegion)) {
    require(!sample.indices_with_label(target).empty(),
            "sabotage: target region not present in the sample labels");
  }

  SabotageResult res;
  PointCloud cloud = sample;
  const double diag = bounding_box(sample).diagonal();

  if (has(SabotageOp::RemoveTaskRegion)) {
    Rng rng(derive_seed(seed, "sabotage-remove"));
    const auto region = cloud.indices_with_label(target);
    // Drop the region points nearest a random region point: a contiguous bite.
    const std::size_t n_region = region.size();
    const std::size_t n_drop = std::min(
        n_region,
        static_cast<std::size_t>(std::ceil(uniform(rng, 0.85, 1.0) * static_cast<double>(n_region))));
    const Vec3 anchor = cloud.points[region[uniform_index(rng, n_region)]];
    std::vector<std::pair<double, std::size_t>> by_dist;
    for (std::size_t i : region) by_dist.emplace_back((cloud.points[i] - anchor).squaredNorm(), i);
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<bool> drop(cloud.size(), false);
    for (std::size_t k = 0; k < n_drop; ++k) drop[by_dist[k].second] = true;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (!drop[i]) keep.push_back(i);
    }
    cloud = cloud.subset(keep);
    res.record.ops.push_back(SabotageOp::RemoveTaskRegion);
    res.record.removed_points = static_cast<int>(n_drop);
  }

  if (has(SabotageOp::PerturbPatches) && !cloud.empty()) {
    Rng rng(derive_seed(seed, "sabotage-perturb"));
    const int n_patches = 2 + static_cast<int>(uniform_index(rng, 4));
    const std::size_t k = std::max<std::size_t>(8, cloud.size() / 24);
    const KdTree tree(cloud);
    std::vector<bool> moved(cloud.size(), false);
    const PointCloud before = cloud;
    for (int p = 0; p < n_patches; ++p) {
      const Vec3 c = before.points[uniform_index(rng, before.size())];
      const auto nn = tree.knn(c, std::min(k, before.size()));
      const Vec3 shift = uniform(rng, 0.05, 0.15) * diag * random_direction(rng);
      const Mat3 rot =
          Eigen::AngleAxisd(uniform(rng, 0.0, kPi / 6.0), random_direction(rng)).toRotationMatrix();
      for (const auto& n : nn) {
        if (moved[n.index]) continue;
        moved[n.index] = true;
        cloud.points[n.index] = c + rot * (before.points[n.index] - c) + shift;
      }
      res.record.max_shift = std::max(res.record.max_shift, shift.norm());
    }
    res.record.ops.push_back(SabotageOp::PerturbPatches);
    res.record.perturbed_patches = n_patches;
  }

  if (has(SabotageOp::AddNoise)) {
    Rng rng(derive_seed(seed, "sabotage-noise"));
    const std::size_t n = sample.size();
    const std::size_t lo = (5 * n + 99) / 100, hi = std::max(lo, 15 * n / 100);
    const std::size_t m = lo + uniform_index(rng, hi - lo + 1);
    Aabb box = bounding_box(cloud.empty() ? sample : cloud);
    const Vec3 pad = 0.1 * (box.hi - box.lo);
    box.lo -= pad;
    box.hi += pad;
    if (!cloud.labeled()) cloud.labels.assign(cloud.size(), 0);
    for (std::size_t i = 0; i < m; ++i) {
      cloud.push_back(Vec3(uniform(rng, box.lo.x(), box.hi.x()), uniform(rng, box.lo.y(), box.hi.y()),
                           uniform(rng, box.lo.z(), box.hi.z())),
                      0);
    }
    res.record.ops.push_back(SabotageOp::AddNoise);
    res.record.outlier_points = static_cast<int>(m);
  }

  res.cloud = std::move(cloud);
  return res;
}

}  // namespace tosc
