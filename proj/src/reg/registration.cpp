#include "tosc/reg/registration.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "tosc/common/error.hpp"
#include "tosc/geom/kdtree.hpp"
#include "tosc/geom/metrics.hpp"

namespace tosc {

PointCloud SimilarityTransform::apply(const PointCloud& c) const {
  PointCloud out = c;
  for (auto& p : out.points) p = apply(p);
  return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
  SimilarityTransform inv;
  inv.scale = 1.0 / scale;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.scale * (inv.rotation * translation));
  return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& inner) const {
  SimilarityTransform out;
  out.scale = scale * inner.scale;
  out.rotation = rotation * inner.rotation;
  out.translation = apply(inner.translation);
  return out;
}

std::array<double, 13> SimilarityTransform::to_array() const {
  std::array<double, 13> a{};
  a[0] = scale;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a[1 + 3 * r + c] = rotation(r, c);
  for (int i = 0; i < 3; ++i) a[10 + i] = translation[i];
  return a;
}

SimilarityTransform SimilarityTransform::from_array(const std::array<double, 13>& a) {
  SimilarityTransform x;
  x.scale = a[0];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) x.rotation(r, c) = a[1 + 3 * r + c];
  for (int i = 0; i < 3; ++i) x.translation[i] = a[10 + i];
  x.validate();
  return x;
}

void SimilarityTransform::validate() const {
  require(scale > 0.0 && std::isfinite(scale), "similarity: scale must be positive");
  require((rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9 &&
              std::abs(rotation.determinant() - 1.0) < 1e-9,
          "similarity: rotation must be a proper rotation");
  require(translation.allFinite(), "similarity: non-finite translation");
}

double rotation_angle(const Mat3& a, const Mat3& b) {
  const double c = 0.5 * ((a.transpose() * b).trace() - 1.0);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

SimilarityTransform weighted_procrustes(const std::vector<WeightedPair>& pairs) {
  double wsum = 0.0;
  Vec3 ms = Vec3::Zero(), mt = Vec3::Zero();
  for (const auto& p : pairs) {
    wsum += p.weight;
    ms += p.weight * p.source;
    mt += p.weight * p.target;
  }
  if (!(wsum > 0.0)) fail(ErrorCode::DegenerateGeometry, "procrustes: no weighted pairs");
  ms /= wsum;
  mt /= wsum;

  Mat3 cov = Mat3::Zero();
  double var_s = 0.0;
  for (const auto& p : pairs) {
    const Vec3 ds = p.source - ms;
    cov += p.weight * (p.target - mt) * ds.transpose();
    var_s += p.weight * ds.squaredNorm();
  }
  cov /= wsum;
  var_s /= wsum;
  if (!(var_s > 0.0)) fail(ErrorCode::DegenerateGeometry, "procrustes: source points coincide");

  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sign = Vec3::Ones();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) sign[2] = -1.0;

  SimilarityTransform x;
  x.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  x.scale = svd.singularValues().dot(sign) / var_s;
  if (!(x.scale > 0.0)) fail(ErrorCode::DegenerateGeometry, "procrustes: non-positive scale");
  x.translation = mt - x.scale * (x.rotation * ms);
  return x;
}

double registration_objective(const PointCloud& target, const PointCloud& source,
                              const PointCloud& target_task, const PointCloud& source_task,
                              double w_task, const SimilarityTransform& x) {
  double j = chamfer(target, x.apply(source));
  if (w_task > 0.0 && !target_task.empty() && !source_task.empty()) {
    j += w_task * chamfer(target_task, x.apply(source_task));
  }
  return j;
}

namespace {

bool degenerate(const PointCloud& c) {
  for (const auto& p : c.points) {
    if (p != c.points.front()) return false;
  }
  return true;
}

// Appends both directions of nearest-neighbour pairs for one cloud pair
// under transform x; the summed weighted residual equals weight * CD.
void add_pairs(const PointCloud& target, const KdTree& target_tree, const PointCloud& source,
               const SimilarityTransform& x, double weight, std::vector<WeightedPair>& out) {
  const PointCloud moved = x.apply(source);
  const KdTree moved_tree(moved);
  const double wt = weight / static_cast<double>(target.size());
  const double ws = weight / static_cast<double>(source.size());
  for (const auto& t : target.points) {
    out.push_back({source.points[moved_tree.nearest(t).index], t, wt});
  }
  for (std::size_t i = 0; i < source.size(); ++i) {
    out.push_back({source.points[i], target.points[target_tree.nearest(moved.points[i]).index], ws});
  }
}

}  // namespace

RegistrationResult task_weighted_icp(const PointCloud& target, const PointCloud& source,
                                     const PointCloud& target_task,
                                     const PointCloud& source_task, const IcpConfig& config) {
  require(!target.empty() && !source.empty(), "icp: empty target or source cloud");
  require(config.w_task >= 0.0, "icp: w_task must be non-negative");
  require(config.max_iterations >= 0, "icp: max_iterations must be non-negative");
  if (degenerate(source)) fail(ErrorCode::DegenerateGeometry, "icp: all source points coincide");

  const bool use_task = config.w_task > 0.0 && !target_task.empty() && !source_task.empty();
  const PointCloud empty;
  const PointCloud& tt = use_task ? target_task : empty;
  const PointCloud& st = use_task ? source_task : empty;
  auto objective = [&](const SimilarityTransform& x) {
    return registration_objective(target, source, tt, st, config.w_task, x);
  };

  RegistrationResult res;
  res.initial_objective = objective(SimilarityTransform{});

  // Centroids aligned, scale from the bbox-diagonal ratio, identity rotation.
  SimilarityTransform init;
  const double ds = bounding_box(source).diagonal();
  const double dt = bounding_box(target).diagonal();
  init.scale = dt > 0.0 ? dt / ds : 1.0;
  init.translation = centroid(target.points) - init.scale * centroid(source.points);
  double current = objective(init);
  res.transform = init;
  if (res.initial_objective < current) {
    res.transform = SimilarityTransform{};
    current = res.initial_objective;
  }
  res.trace.push_back(current);

  const KdTree target_tree(target);
  const KdTree task_tree = use_task ? KdTree(target_task) : KdTree();
  std::vector<WeightedPair> pairs;
  for (int it = 0; it < config.max_iterations; ++it) {
    pairs.clear();
    add_pairs(target, target_tree, source, res.transform, 1.0, pairs);
    if (use_task) add_pairs(target_task, task_tree, source_task, res.transform, config.w_task, pairs);
    const SimilarityTransform next = weighted_procrustes(pairs);
    const double value = objective(next);
    res.iterations = it + 1;
    if (!(value <= current)) {
      // The surrogate step cannot increase the objective except by rounding; stop.
      res.converged = true;
      break;
    }
    const double decrease = current - value;
    res.transform = next;
    current = value;
    res.trace.push_back(current);
    if (decrease < config.tolerance) {
      res.converged = true;
      break;
    }
  }
  res.objective = current;
  return res;
}

}  // namespace tosc
