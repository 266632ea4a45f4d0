#include "tosc/flowgrasp/flow.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "tosc/common/error.hpp"
#include "tosc/common/rng.hpp"
#include "tosc/geom/sampling.hpp"
#include "tosc/nnet/adam.hpp"
#include "tosc/nnet/checkpoint.hpp"

namespace tosc {

using nn::Matrix;
using nn::RowVector;
using nlohmann::json;

namespace {
constexpr double kPi = 3.141592653589793;
}

void FlowConfig::validate() const {
  require(dim >= 1 && hidden >= 1 && layers >= 1, "flow config: dim, hidden and layers must be positive");
  require(time_freqs >= 0, "flow config: time_freqs must be >= 0");
  if (conditional) {
    require(cond_points >= 1 && cond_hidden >= 1 && cond_feature >= 1 && n_tasks >= 1 && task_dim >= 1,
            "flow config: condition encoder sizes must be positive");
  }
}

std::string FlowConfig::to_json() const {
  json j = {{"dim", dim},         {"hidden", hidden},           {"layers", layers},
            {"time_freqs", time_freqs}, {"conditional", conditional}, {"cond_points", cond_points},
            {"cond_hidden", cond_hidden}, {"cond_feature", cond_feature}, {"n_tasks", n_tasks},
            {"task_dim", task_dim}};
  return j.dump();
}

FlowConfig FlowConfig::from_json(const std::string& text) {
  FlowConfig c;
  try {
    const json j = json::parse(text);
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("dim", c.dim);
    get("hidden", c.hidden);
    get("layers", c.layers);
    get("time_freqs", c.time_freqs);
    get("conditional", c.conditional);
    get("cond_points", c.cond_points);
    get("cond_hidden", c.cond_hidden);
    get("cond_feature", c.cond_feature);
    get("n_tasks", c.n_tasks);
    get("task_dim", c.task_dim);
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("flow config: ") + e.what());
  }
  c.validate();
  return c;
}

ConditionInput make_condition_input(const PointCloud& cloud, const std::vector<std::size_t>& task,
                                    long n_points, long task_id) {
  require(!cloud.empty(), "condition: empty cloud");
  require(n_points >= 1, "condition: n_points must be positive");
  std::vector<bool> is_task(cloud.size(), false);
  for (auto i : task) {
    require(i < cloud.size(), "condition: task index out of range");
    is_task[i] = true;
  }
  const auto idx = resample_indices(cloud, static_cast<std::size_t>(n_points));
  ConditionInput in;
  in.task_id = task_id;
  in.points.resize(n_points, 4);
  for (long r = 0; r < n_points; ++r) {
    const auto i = idx[static_cast<std::size_t>(r)];
    in.points.row(r) << cloud.points[i].transpose(), is_task[i] ? 1.0 : 0.0;
  }
  return in;
}

FlowModel::FlowModel(const FlowConfig& config, std::uint64_t seed) : config_(config), params_(seed) {
  config_.validate();
  if (config_.conditional) {
    cond_pool_ = nn::SetPool(params_, "cond.pool", 4, config_.cond_hidden, config_.cond_feature);
    task_ = nn::Embedding(params_, "cond.task", config_.n_tasks, config_.task_dim);
  }
  long in = config_.dim + config_.time_dim() + config_.cond_dim();
  for (int l = 0; l < config_.layers; ++l) {
    layers_.emplace_back(params_, "vel." + std::to_string(l), in, config_.hidden, nn::Init::He);
    in = config_.hidden;
  }
  layers_.emplace_back(params_, "vel.out", in, config_.dim, nn::Init::Xavier);
}

RowVector FlowModel::encode_condition(const ConditionInput& in, CondCache& cache) const {
  require(config_.conditional, "encode_condition: model is unconditional");
  require(in.points.cols() == 4 && in.points.rows() >= 1, "encode_condition: bad point matrix");
  require(in.task_id >= 0 && in.task_id < config_.n_tasks, "encode_condition: task id out of range");
  cache.task_id = in.task_id;
  const Matrix feat = cond_pool_.forward(in.points, in.points.rows(), cache.pool);
  RowVector out(config_.cond_dim());
  out << feat.row(0), task_.forward(in.task_id);
  return out;
}

void FlowModel::condition_backward(const RowVector& dcond, const CondCache& cache) const {
  cond_pool_.backward(dcond.head(config_.cond_feature), cache.pool);
  task_.backward(cache.task_id, dcond.tail(config_.task_dim));
}

Matrix time_embedding(const Eigen::VectorXd& t, int freqs) {
  Matrix e(t.size(), 1 + 2 * freqs);
  for (long i = 0; i < t.size(); ++i) {
    e(i, 0) = t[i];
    for (int k = 0; k < freqs; ++k) {
      const double w = kPi * std::ldexp(1.0, k) * t[i];
      e(i, 1 + 2 * k) = std::sin(w);
      e(i, 2 + 2 * k) = std::cos(w);
    }
  }
  return e;
}

Matrix FlowModel::velocity(const Matrix& x, const Eigen::VectorXd& t, const Matrix& cond,
                           VelCache& cache) const {
  const long b = x.rows();
  require(x.cols() == config_.dim && t.size() == b, "velocity: shape mismatch");
  require(cond.rows() == b && cond.cols() == config_.cond_dim(),
          "velocity: condition shape mismatch");
  cache.input.resize(b, config_.dim + config_.time_dim() + config_.cond_dim());
  cache.input << x, time_embedding(t, config_.time_freqs), cond;
  cache.pre.clear();
  Matrix h = cache.input;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    cache.pre.push_back(layers_[l].forward(h));
    h = nn::gelu(cache.pre.back());
  }
  return layers_.back().forward(h);
}

Matrix FlowModel::velocity(const Matrix& x, const Eigen::VectorXd& t, const Matrix& cond) const {
  VelCache cache;
  return velocity(x, t, cond, cache);
}

Matrix FlowModel::velocity_backward(const Matrix& dv, const VelCache& cache) const {
  const std::size_t n = cache.pre.size();
  Matrix d = layers_.back().backward(n ? nn::gelu(cache.pre.back()) : cache.input, dv);
  for (std::size_t l = n; l-- > 0;) {
    d = nn::gelu_backward(cache.pre[l], d);
    d = layers_[l].backward(l ? nn::gelu(cache.pre[l - 1]) : cache.input, d);
  }
  return d.rightCols(config_.cond_dim());
}

FlowObject make_flow_object(const PointCloud& cloud, const std::vector<std::size_t>& task,
                            long task_id, const GripperModel& gripper, const FlowConfig& config,
                            const ConstraintWeights& weights, double alpha0) {
  FlowObject obj;
  obj.condition = make_condition_input(cloud, task, config.cond_points, task_id);
  obj.gripper = std::make_shared<const GripperModel>(gripper);
  obj.scene = std::make_shared<const GraspScene>(cloud, cloud.subset(task));
  obj.constraints = grasp_constraints(*obj.gripper, *obj.scene, weights, alpha0);
  return obj;
}

CfmDraw draw_cfm(const std::vector<const FlowExample*>& batch, const std::vector<FlowObject>& objects,
                 long dim, std::uint64_t seed) {
  require(!batch.empty(), "cfm: empty batch");
  const long b = static_cast<long>(batch.size());
  CfmDraw d;
  d.x0.resize(b, dim);
  d.xt.resize(b, dim);
  d.target.resize(b, dim);
  d.t.resize(b);
  for (long i = 0; i < b; ++i) {
    const FlowExample& ex = *batch[static_cast<std::size_t>(i)];
    require(ex.x1.size() == dim, "cfm: sample has the wrong dimension");
    Rng rng = make_rng(seed, "cfm", static_cast<std::uint64_t>(i));
    Eigen::VectorXd x0(dim);
    for (long k = 0; k < dim; ++k) x0[k] = normal(rng);
    const double t = uniform(rng, 0.0, 1.0);
    const Eigen::VectorXd xt = interpolate(x0, ex.x1, t);
    Eigen::VectorXd u;
    if (objects.empty()) {
      u = ex.x1 - x0;
    } else {
      require(ex.object < objects.size(), "cfm: object index out of range");
      u = corrected_velocity(x0, ex.x1, t, xt, objects[ex.object].constraints);
    }
    d.x0.row(i) = x0.transpose();
    d.xt.row(i) = xt.transpose();
    d.target.row(i) = u.transpose();
    d.t[i] = t;
  }
  return d;
}

double cfm_loss(FlowModel& model, const std::vector<const FlowExample*>& batch,
                const std::vector<FlowObject>& objects, std::uint64_t seed, bool accumulate) {
  const auto& cfg = model.config();
  const CfmDraw d = draw_cfm(batch, objects, cfg.dim, seed);
  const long b = d.xt.rows();

  // One condition encoding per distinct object in the batch.
  std::vector<long> slot(objects.size(), -1);
  std::vector<std::size_t> used;
  std::vector<FlowModel::CondCache> caches;
  Matrix cond(b, cfg.cond_dim());
  if (cfg.conditional) {
    require(!objects.empty(), "cfm: conditional model needs objects");
    std::vector<RowVector> enc;
    for (long i = 0; i < b; ++i) {
      const std::size_t o = batch[static_cast<std::size_t>(i)]->object;
      if (slot[o] < 0) {
        slot[o] = static_cast<long>(used.size());
        used.push_back(o);
        caches.emplace_back();
        enc.push_back(model.encode_condition(objects[o].condition, caches.back()));
      }
      cond.row(i) = enc[static_cast<std::size_t>(slot[o])];
    }
  }
  FlowModel::VelCache vc;
  const Matrix v = model.velocity(d.xt, d.t, cond, vc);
  nn::require_finite(v, "flow velocity");
  const Matrix diff = v - d.target;
  const double loss = diff.squaredNorm() / static_cast<double>(b);
  if (accumulate) {
    const Matrix dcond = model.velocity_backward(diff * (2.0 / static_cast<double>(b)), vc);
    if (cfg.conditional) {
      std::vector<RowVector> dsum(used.size(), RowVector::Zero(cfg.cond_dim()));
      for (long i = 0; i < b; ++i) {
        dsum[static_cast<std::size_t>(slot[batch[static_cast<std::size_t>(i)]->object])] += dcond.row(i);
      }
      for (std::size_t s = 0; s < used.size(); ++s) model.condition_backward(dsum[s], caches[s]);
    }
  }
  return loss;
}

Matrix sample_flow_from(const FlowModel& model, const RowVector& cond, Matrix x, int steps) {
  require(steps >= 1, "sample: steps must be >= 1");
  const auto& cfg = model.config();
  require(x.cols() == cfg.dim, "sample: x0 has the wrong dimension");
  require(cond.size() == cfg.cond_dim(), "sample: condition has the wrong dimension");
  const long n = x.rows();
  Matrix c(n, cfg.cond_dim());
  for (long i = 0; i < c.rows(); ++i) c.row(i) = cond;
  const double h = 1.0 / steps;
  for (int s = 0; s < steps; ++s) {
    const Eigen::VectorXd t = Eigen::VectorXd::Constant(n, s * h);
    const Matrix v = model.velocity(x, t, c);
    if (!v.allFinite()) {
      fail(ErrorCode::NumericFailure, "sample: non-finite velocity at step " + std::to_string(s));
    }
    x += h * v;
  }
  return x;
}

Matrix sample_flow(const FlowModel& model, const RowVector& cond, long count, int steps,
                   std::uint64_t seed) {
  require(count >= 1, "sample: count must be >= 1");
  const long dim = model.config().dim;
  Matrix x0(count, dim);
  for (long i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, "sample-x0", static_cast<std::uint64_t>(i));
    for (long k = 0; k < dim; ++k) x0(i, k) = normal(rng);
  }
  return sample_flow_from(model, cond, std::move(x0), steps);
}

GraspVector sample(const FlowModel& model, const RowVector& cond, int steps, std::uint64_t seed) {
  return sample_flow(model, cond, 1, steps, seed).row(0).transpose();
}

std::vector<FlowEpochLog> train_flowgrasp(FlowModel& model, const std::vector<FlowExample>& data,
                                          const std::vector<FlowObject>& objects,
                                          const FlowTrainConfig& config,
                                          const std::function<void(const FlowEpochLog&)>& on_epoch) {
  require(!data.empty(), "train_flowgrasp: empty dataset");
  require(config.epochs >= 1 && config.batch >= 1, "train_flowgrasp: epochs and batch must be >= 1");
  require(config.lr > 0.0 && config.weight_decay >= 0.0, "train_flowgrasp: bad optimizer settings");
  nn::AdamConfig adam;
  adam.lr = config.lr;
  adam.weight_decay = config.weight_decay;
  std::vector<std::size_t> order(data.size());
  std::vector<FlowEpochLog> log;
  const std::size_t bs = static_cast<std::size_t>(config.batch);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(config.seed, "flow-shuffle", static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    FlowEpochLog entry;
    entry.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++steps) {
      std::vector<const FlowExample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) batch.push_back(&data[order[i]]);
      model.params().zero_grad();
      const auto seed = derive_seed(config.seed, "flow-step",
                                    static_cast<std::uint64_t>(epoch) * 1000003ULL + steps);
      entry.loss += cfm_loss(model, batch, objects, seed, true);
      model.params().check_finite();
      nn::adam_step(model.params(), adam);
    }
    entry.loss /= static_cast<double>(steps);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

void save_flow(const std::filesystem::path& path, const FlowModel& model) {
  json meta = {{"model", "flowgrasp"}, {"config", json::parse(model.config().to_json())}};
  nn::save_checkpoint(path, model.params(), meta.dump());
}

std::unique_ptr<FlowModel> load_flow(const std::filesystem::path& path) {
  json meta;
  try {
    meta = json::parse(nn::read_checkpoint_meta(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::Io, "flow checkpoint meta: " + std::string(e.what()));
  }
  if (meta.value("model", "") != "flowgrasp" || !meta.contains("config")) {
    fail(ErrorCode::InvalidArgument, "not a flowgrasp checkpoint: " + path.string());
  }
  auto model = std::make_unique<FlowModel>(FlowConfig::from_json(meta["config"].dump()), 0);
  nn::load_checkpoint(path, model->params());
  return model;
}

}  // namespace tosc
