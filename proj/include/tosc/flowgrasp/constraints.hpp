#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tosc/flowgrasp/gripper.hpp"
#include "tosc/geom/kdtree.hpp"

namespace tosc {

/// Object cloud and its task region, with search trees. Both must be non-empty.
class GraspScene {
 public:
  GraspScene(PointCloud object, PointCloud task);

  const PointCloud& object() const { return object_; }
  const PointCloud& task() const { return task_; }
  const KdTree& object_tree() const { return object_tree_; }
  const KdTree& task_tree() const { return task_tree_; }

 private:
  PointCloud object_, task_;
  KdTree object_tree_, task_tree_;
};

struct ConstraintValue {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// sum over fingertips of max(0, r - dist(tip, object))^2.
ConstraintValue constraint_penetration(const GripperModel& g, const GraspVector& x,
                                       const GraspScene& scene);
/// sum over fingertips of the squared distance to the nearest task point.
ConstraintValue constraint_contact(const GripperModel& g, const GraspVector& x,
                                   const GraspScene& scene);
/// sum over joints of softplus barriers beyond [lo, hi], each divided by beta.
ConstraintValue constraint_joint_limits(const GripperModel& g, const GraspVector& x,
                                        double beta = 40.0);

struct ConstraintTerm {
  std::string name;
  double weight = 1.0;
  std::function<ConstraintValue(const Eigen::VectorXd&)> fn;
};

/// Weighted constraints with the correction strength alpha(t) = alpha0 (1 - t).
struct ConstraintSet {
  std::vector<ConstraintTerm> terms;
  double alpha0 = 0.1;

  double alpha(double t) const { return alpha0 * (1.0 - t); }
  /// sum_i w_i g_i(x) and its gradient.
  ConstraintValue evaluate(const Eigen::VectorXd& x) const;
  bool active() const;
};

struct ConstraintWeights {
  double penetration = 1.0;
  double contact = 0.5;
  double joint_limits = 0.1;
};

/// Penetration, task contact and joint limits bound to one scene. The scene
/// and gripper must outlive the returned set.
ConstraintSet grasp_constraints(const GripperModel& g, const GraspScene& scene,
                                const ConstraintWeights& w = {}, double alpha0 = 0.1);

Eigen::VectorXd interpolate(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t);

/// u* = (x1 - x0) - alpha(t) grad_x sum_i w_i g_i(x_t).
Eigen::VectorXd corrected_velocity(const Eigen::VectorXd& x0, const Eigen::VectorXd& x1, double t,
                                   const Eigen::VectorXd& xt, const ConstraintSet& constraints);

}  // namespace tosc
