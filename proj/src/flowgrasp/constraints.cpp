#include "tosc/flowgrasp/constraints.hpp"

#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc {

namespace {

double softplus(double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); }
double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

GraspScene::GraspScene(PointCloud object, PointCloud task)
    : object_(std::move(object)), task_(std::move(task)) {
  require(!object_.empty(), "grasp scene: empty object cloud");
  require(!task_.empty(), "grasp scene: empty task-region cloud");
  object_tree_ = KdTree(object_);
  task_tree_ = KdTree(task_);
}

ConstraintValue constraint_penetration(const GripperModel& g, const GraspVector& x,
                                       const GraspScene& scene) {
  const HandPoints tips = fk_fingertips(g, x);
  ConstraintValue out{0.0, Eigen::VectorXd::Zero(g.dim())};
  for (std::size_t f = 0; f < tips.points.size(); ++f) {
    const Vec3& c = tips.points[f];
    const auto nn = scene.object_tree().nearest(c);
    const double d = std::sqrt(nn.sq_dist);
    const double gap = g.tip_radius - d;
    if (gap <= 0.0) continue;
    out.value += gap * gap;
    if (d > 0.0) {
      const Vec3 dc = -2.0 * gap * (c - scene.object().points[nn.index]) / d;
      out.grad += tips.jacobians[f].transpose() * dc;
    }
  }
  return out;
}

ConstraintValue constraint_contact(const GripperModel& g, const GraspVector& x,
                                   const GraspScene& scene) {
  const HandPoints tips = fk_fingertips(g, x);
  ConstraintValue out{0.0, Eigen::VectorXd::Zero(g.dim())};
  for (std::size_t f = 0; f < tips.points.size(); ++f) {
    const Vec3& c = tips.points[f];
    const auto nn = scene.task_tree().nearest(c);
    out.value += nn.sq_dist;
    out.grad += tips.jacobians[f].transpose() * (2.0 * (c - scene.task().points[nn.index]));
  }
  return out;
}

ConstraintValue constraint_joint_limits(const GripperModel& g, const GraspVector& x, double beta) {
  require(x.size() == g.dim(), "grasp vector has the wrong dimension");
  require(beta > 0.0, "joint limits: beta must be positive");
  ConstraintValue out{0.0, Eigen::VectorXd::Zero(g.dim())};
  for (int j = 0; j < g.joints(); ++j) {
    const double q = x[9 + j];
    const double hi = beta * (q - g.joint_upper(j)), lo = beta * (g.joint_lower(j) - q);
    out.value += (softplus(hi) + softplus(lo)) / beta;
    out.grad[9 + j] = logistic(hi) - logistic(lo);
  }
  return out;
}

ConstraintValue ConstraintSet::evaluate(const Eigen::VectorXd& x) const {
  ConstraintValue out{0.0, Eigen::VectorXd::Zero(x.size())};
  for (const auto& term : terms) {
    if (term.weight == 0.0) continue;
    const ConstraintValue v = term.fn(x);
    require(v.grad.size() == x.size(), "constraint gradient has the wrong dimension");
    out.value += term.weight * v.value;
    out.grad += term.weight * v.grad;
  }
  return out;
}

bool ConstraintSet::active() const {
  if (alpha0 == 0.0) return false;
  for (const auto& term : terms) {
    if (term.weight != 0.0) return true;
  }
  return false;
}

ConstraintSet grasp_constraints(const GripperModel& g, const GraspScene& scene,
                                const ConstraintWeights& w, double alpha0) {
  ConstraintSet set;
  set.alpha0 = alpha0;
  const GripperModel* gp = &g;
  const GraspScene* sp = &scene;
  set.terms.push_back({"penetration", w.penetration,
                       [gp, sp](const Eigen::VectorXd& x) { return constraint_penetration(*gp, x, *sp); }});
  set.terms.push_back({"contact", w.contact,
                       [gp, sp](const Eigen::VectorXd& x) { return constraint_contact(*gp, x, *sp); }});
  set.terms.push_back({"joint_limits", w.joint_limits,
                       [gp](const Eigen::VectorXd& x) { return constraint_joint_limits(*gp, x); }});
  return set;
}

Eigen::VectorXd interpolate(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t) {
  require(t >= 0.0 && t <= 1.0, "interpolate: t must be in [0, 1]");
  require(x0.size() == x1.size(), "interpolate: dimension mismatch");
  return (1.0 - t) * x0 + t * x1;
}

Eigen::VectorXd corrected_velocity(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t,
                                   const Eigen::VectorXd& xt, const ConstraintSet& constraints) {
  require(t >= 0.0 && t <= 1.0, "corrected_velocity: t must be in [0, 1]");
  require(x0.size() == x1.size() && xt.size() == x0.size(), "corrected_velocity: dimension mismatch");
  Eigen::VectorXd u = x1 - x0;
  const double a = constraints.alpha(t);
  if (a != 0.0 && constraints.active()) u -= a * constraints.evaluate(xt).grad;
  return u;
}

}  // namespace tosc
