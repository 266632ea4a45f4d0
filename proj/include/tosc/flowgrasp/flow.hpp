#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tosc/flowgrasp/constraints.hpp"
#include "tosc/nnet/layers.hpp"
#include "tosc/nnet/tensor.hpp"

namespace tosc {

struct FlowConfig {
  long dim = 15;
  long hidden = 256;
  int layers = 3;
  int time_freqs = 6;
  // Condition encoder; disabled for unconditional flows.
  bool conditional = true;
  long cond_points = 128;
  long cond_hidden = 64;
  long cond_feature = 64;
  long n_tasks = 1;
  long task_dim = 16;

  long time_dim() const { return 1 + 2L * time_freqs; }
  long cond_dim() const { return conditional ? cond_feature + task_dim : 0; }
  void validate() const;
  std::string to_json() const;
  static FlowConfig from_json(const std::string& text);
};

/// Encoder input for one object: cond_points rows of (x, y, z, task flag) in
/// the object's normalized frame.
struct ConditionInput {
  nn::Matrix points;
  long task_id = 0;
};

ConditionInput make_condition_input(const PointCloud& cloud, const std::vector<std::size_t>& task,
                                    long n_points, long task_id);

class FlowModel {
 public:
  FlowModel(const FlowConfig& config, std::uint64_t seed);
  FlowModel(const FlowModel&) = delete;
  FlowModel& operator=(const FlowModel&) = delete;

  const FlowConfig& config() const { return config_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  struct CondCache {
    nn::SetPool::Cache pool;
    long task_id = 0;
  };
  /// l_con = [set-pool feature of the cloud, task embedding].
  nn::RowVector encode_condition(const ConditionInput& in, CondCache& cache) const;
  void condition_backward(const nn::RowVector& dcond, const CondCache& cache) const;

  struct VelCache {
    nn::Matrix input;
    std::vector<nn::Matrix> pre;  // pre-activations of the hidden layers
  };
  /// x: B x dim, t: B, cond: B x cond_dim (empty when unconditional).
  nn::Matrix velocity(const nn::Matrix& x, const Eigen::VectorXd& t, const nn::Matrix& cond,
                      VelCache& cache) const;
  nn::Matrix velocity(const nn::Matrix& x, const Eigen::VectorXd& t, const nn::Matrix& cond) const;
  /// Accumulates parameter grads; returns d(cond).
  nn::Matrix velocity_backward(const nn::Matrix& dv, const VelCache& cache) const;

 private:
  FlowConfig config_;
  nn::ParamSet params_;
  nn::SetPool cond_pool_;
  nn::Embedding task_;
  std::vector<nn::Linear> layers_;
};

nn::Matrix time_embedding(const Eigen::VectorXd& t, int freqs);

/// One object in a grasp dataset, with its constraint scene.
struct FlowObject {
  ConditionInput condition;
  std::shared_ptr<const GripperModel> gripper;
  std::shared_ptr<const GraspScene> scene;
  ConstraintSet constraints;  // bound to gripper and scene
};

FlowObject make_flow_object(const PointCloud& cloud, const std::vector<std::size_t>& task,
                            long task_id, const GripperModel& gripper, const FlowConfig& config,
                            const ConstraintWeights& weights, double alpha0);

struct FlowExample {
  Eigen::VectorXd x1;
  std::size_t object = 0;  // ignored when the model is unconditional
};

/// The per-sample draws of one CFM step.
struct CfmDraw {
  nn::Matrix x0, xt, target;
  Eigen::VectorXd t;
};

CfmDraw draw_cfm(const std::vector<const FlowExample*>& batch, const std::vector<FlowObject>& objects,
                 long dim, std::uint64_t seed);

/// mean over the batch of |v(x_t, t, l_con) - u*_t|^2; with accumulate,
/// gradients are added to the model parameters.
double cfm_loss(FlowModel& model, const std::vector<const FlowExample*>& batch,
                const std::vector<FlowObject>& objects, std::uint64_t seed, bool accumulate = false);

/// Explicit Euler from x0 ~ N(0, I) (drawn from seed, independently per
/// sample index) over `steps` uniform steps. cond may be empty for
/// unconditional models. Throws NumericFailure naming the step on a
/// non-finite velocity.
nn::Matrix sample_flow(const FlowModel& model, const nn::RowVector& cond, long count, int steps,
                       std::uint64_t seed);
nn::Matrix sample_flow_from(const FlowModel& model, const nn::RowVector& cond, nn::Matrix x0,
                            int steps);
GraspVector sample(const FlowModel& model, const nn::RowVector& cond, int steps, std::uint64_t seed);

struct FlowTrainConfig {
  int epochs = 350;
  int batch = 64;
  double lr = 1e-3;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
};

struct FlowEpochLog {
  int epoch = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

std::vector<FlowEpochLog> train_flowgrasp(FlowModel& model, const std::vector<FlowExample>& data,
                                          const std::vector<FlowObject>& objects,
                                          const FlowTrainConfig& config,
                                          const std::function<void(const FlowEpochLog&)>& on_epoch = {});

void save_flow(const std::filesystem::path& path, const FlowModel& model);
std::unique_ptr<FlowModel> load_flow(const std::filesystem::path& path);

}  // namespace tosc
