#include <chrono>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/testing.hpp"
#include "tosc/flowgrasp/constraints.hpp"
#include "tosc/flowgrasp/flow.hpp"
#include "tosc/flowgrasp/grasps.hpp"
#include "tosc/flowgrasp/gripper.hpp"
#include "tosc/synth/shapes.hpp"

using namespace tosc;
using tosc::nn::Matrix;
using tosc::nn::RowVector;
using tosc::testing::throws_code;

namespace {

constexpr double kTwoPi = 6.283185307179586;

GraspVector random_grasp(const GripperModel& g, Rng& rng) {
  GraspPose p;
  p.translation = Vec3(uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5));
  p.rotation = tosc::testing::random_rotation(rng, 3.14159);
  p.joints.resize(g.joints());
  for (int j = 0; j < g.joints(); ++j) p.joints[j] = uniform(rng, -0.6, 2.0);
  GraspVector x = encode_grasp(g, p);
  // Non-orthonormal 6D input exercises the Gram-Schmidt derivative.
  for (int k = 3; k < 9; ++k) x[k] += 0.2 * normal(rng);
  return x;
}

// Column-wise central differences of a point-valued function.
Jacobian fd_jacobian(const std::function<Vec3(const GraspVector&)>& f, GraspVector x, double h) {
  Jacobian j(3, x.size());
  for (long k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const Vec3 a = f(x);
    x[k] = x0 - h;
    const Vec3 b = f(x);
    x[k] = x0;
    j.col(k) = (a - b) / (2 * h);
  }
  return j;
}

double fd_check_scalar(const std::function<double(const GraspVector&)>& f, GraspVector x,
                       const Eigen::VectorXd& analytic, double h = 1e-6) {
  double worst = 0.0;
  for (long k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double a = f(x);
    x[k] = x0 - h;
    const double b = f(x);
    x[k] = x0;
    const double num = (a - b) / (2 * h);
    worst = std::max(worst, std::abs(num - analytic[k]) / std::max({std::abs(num), std::abs(analytic[k]), 1e-6}));
  }
  return worst;
}

PointCloud plane_cloud(double z, double extent, int n) {
  PointCloud c;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      c.push_back(Vec3(-extent + 2 * extent * i / (n - 1), -extent + 2 * extent * j / (n - 1), z));
    }
  }
  return c;
}

}  // namespace

TEST_CASE("fk: rest pose and rigid translation") {
  GripperModel g;
  GraspPose p{Vec3::Zero(), Mat3::Identity(), Eigen::VectorXd::Zero(g.joints())};
  const auto tips = fk_fingertips(g, encode_grasp(g, p));
  REQUIRE(tips.points.size() == 3);
  for (int f = 0; f < 3; ++f) {
    const double phi = kTwoPi * f / 3;
    const Vec3 expect(g.palm_radius * std::cos(phi), g.palm_radius * std::sin(phi), g.link1 + g.link2);
    CHECK((tips.points[f] - expect).norm() < 1e-12);
  }
  // Flexing only the distal joint of finger 0 by 90 degrees points it inwards.
  p.joints[1] = kTwoPi / 4;
  const auto bent = fk_fingertips(g, encode_grasp(g, p));
  CHECK((bent.points[0] - Vec3(g.palm_radius - g.link2, 0, g.link1)).norm() < 1e-12);

  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    GraspVector x = random_grasp(g, rng);
    const Vec3 dt(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    GraspVector y = x;
    y.head<3>() += dt;
    const auto a = hand_spheres(g, x), b = hand_spheres(g, y);
    for (std::size_t i = 0; i < a.points.size(); ++i) CHECK((b.points[i] - a.points[i] - dt).norm() < 1e-12);
  }
}

TEST_CASE("fk: analytic Jacobians match finite differences at 100 random grasps") {
  GripperModel g;
  Rng rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const GraspVector x = random_grasp(g, rng);
    const auto hs = hand_spheres(g, x);
    for (std::size_t i = 0; i < hs.points.size(); ++i) {
      auto f = [&](const GraspVector& y) { return hand_spheres(g, y).points[i]; };
      const Jacobian num = fd_jacobian(f, x, 1e-6);
      worst = std::max(worst, (num - hs.jacobians[i]).norm() / std::max(1.0, hs.jacobians[i].norm()));
    }
  }
  MESSAGE("worst Jacobian rel err " << worst);
  CHECK(worst < 1e-5);
}

TEST_CASE("6D rotation: orthonormal output, round trip, degenerate input") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd r6(6);
    for (int k = 0; k < 6; ++k) r6[k] = normal(rng);
    const Mat3 r = rotation_from_6d(r6);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
    CHECK((rotation_from_6d(rotation_to_6d(r)) - r).norm() < 1e-12);
  }
  Eigen::VectorXd bad(6);
  bad << 1, 0, 0, 2, 0, 0;
  CHECK(throws_code(ErrorCode::DegenerateGeometry, [&] { rotation_from_6d(bad); }));
}

TEST_CASE("constraints: boundary cases and errors") {
  // Dyadic lengths keep every coordinate below exactly representable.
  GripperModel g;
  g.link1 = 0.25;
  g.link2 = 0.125;
  g.tip_radius = 0.03125;
  GraspPose p{Vec3::Zero(), Mat3::Identity(), Eigen::VectorXd::Zero(g.joints())};
  const GraspVector x = encode_grasp(g, p);
  const auto tips = fk_fingertips(g, x);

  // Object and task points exactly r above each fingertip.
  PointCloud touching, on_tips;
  for (const auto& t : tips.points) {
    touching.push_back(t + Vec3(0, 0, g.tip_radius));
    on_tips.push_back(t);
  }
  GraspScene boundary(touching, on_tips);
  CHECK(constraint_penetration(g, x, boundary).value == 0.0);
  CHECK(constraint_contact(g, x, boundary).value == 0.0);
  CHECK(constraint_contact(g, x, boundary).grad.norm() == 0.0);

  GraspScene inside(on_tips, touching);
  CHECK(constraint_penetration(g, x, inside).value > 0.0);
  CHECK(constraint_contact(g, x, inside).value ==
        doctest::Approx(3 * g.tip_radius * g.tip_radius));

  const auto jl = constraint_joint_limits(g, x);
  CHECK(jl.value >= 0.0);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { GraspScene(PointCloud{}, on_tips); }));
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { GraspScene(on_tips, PointCloud{}); }));
}

TEST_CASE("constraints: gradients match finite differences at 100 random points") {
  GripperModel g;
  Rng rng(4);
  // Object: dense sheet near the hand; task: a small patch of it.
  PointCloud object = plane_cloud(0.17, 0.4, 60);
  std::vector<std::size_t> task_idx;
  for (std::size_t i = 0; i < object.size(); ++i) {
    if (object.points[i].x() > 0.1) task_idx.push_back(i);
  }
  GraspScene scene(object, object.subset(task_idx));
  double w_pen = 0.0, w_con = 0.0, w_jl = 0.0;
  int pen_active = 0;
  for (int trial = 0; trial < 100; ++trial) {
    GraspPose p{Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.04, 0.04)),
                tosc::testing::random_rotation(rng, 0.3), Eigen::VectorXd(g.joints())};
    for (int j = 0; j < g.joints(); ++j) p.joints[j] = uniform(rng, -0.8, 2.2);
    const GraspVector x = encode_grasp(g, p);
    // Skip points within h of a kink (nearest-neighbour switch or the max(0, .) boundary).
    auto pen = [&](const GraspVector& y) { return constraint_penetration(g, y, scene).value; };
    auto con = [&](const GraspVector& y) { return constraint_contact(g, y, scene).value; };
    auto jlf = [&](const GraspVector& y) { return constraint_joint_limits(g, y).value; };
    const auto pv = constraint_penetration(g, x, scene);
    pen_active += pv.value > 0.0;
    w_pen = std::max(w_pen, fd_check_scalar(pen, x, pv.grad, 1e-7));
    w_con = std::max(w_con, fd_check_scalar(con, x, constraint_contact(g, x, scene).grad, 1e-7));
    w_jl = std::max(w_jl, fd_check_scalar(jlf, x, constraint_joint_limits(g, x).grad, 1e-5));
  }
  MESSAGE("penetration " << w_pen << " (active at " << pen_active << "/100), contact " << w_con
                         << ", joint limits " << w_jl);
  CHECK(pen_active > 20);
  CHECK(w_pen < 1e-4);
  CHECK(w_con < 1e-4);
  CHECK(w_jl < 1e-4);
}

TEST_CASE("interpolate and corrected velocity") {
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(4), x1 = Eigen::VectorXd::Constant(4, 2.0);
  CHECK(interpolate(x0, x1, 0.0) == x0);
  CHECK(interpolate(x0, x1, 1.0) == x1);
  CHECK((interpolate(x0, x1, 0.5) - Eigen::VectorXd::Constant(4, 1.0)).norm() == 0.0);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { interpolate(x0, x1, 1.5); }));
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { interpolate(x0, x1, -0.1); }));

  ConstraintSet quad;
  quad.alpha0 = 1.0;
  quad.terms.push_back({"half-norm", 1.0, [](const Eigen::VectorXd& x) {
                          return ConstraintValue{0.5 * x.squaredNorm(), x};
                        }});
  Rng rng(5);
  Eigen::VectorXd a(4), b(4), xt(4);
  for (int k = 0; k < 4; ++k) {
    a[k] = normal(rng);
    b[k] = normal(rng);
    xt[k] = normal(rng);
  }
  CHECK((corrected_velocity(a, b, 0.0, xt, quad) - (b - a - xt)).norm() < 1e-15);
  CHECK(quad.alpha(1.0) == 0.0);
  CHECK((corrected_velocity(a, b, 1.0, xt, quad) - (b - a)).norm() == 0.0);
  ConstraintSet off = quad;
  off.alpha0 = 0.0;
  CHECK((corrected_velocity(a, b, 0.3, xt, off) - (b - a)).norm() == 0.0);
}

TEST_CASE("corrected velocity: gradient term matches finite differences of the weighted sum") {
  GripperModel g;
  PointCloud object = plane_cloud(0.17, 0.4, 60);
  std::vector<std::size_t> task_idx;
  for (std::size_t i = 0; i < object.size(); ++i) {
    if (object.points[i].y() < 0.0) task_idx.push_back(i);
  }
  GraspScene scene(object, object.subset(task_idx));
  ConstraintSet cs = grasp_constraints(g, scene, {}, 0.7);
  Rng rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    GraspPose p{Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.04, 0.04)),
                tosc::testing::random_rotation(rng, 0.3), Eigen::VectorXd(g.joints())};
    for (int j = 0; j < g.joints(); ++j) p.joints[j] = uniform(rng, -0.8, 2.2);
    const GraspVector xt = encode_grasp(g, p);
    Eigen::VectorXd x0(g.dim()), x1(g.dim());
    for (int k = 0; k < g.dim(); ++k) {
      x0[k] = normal(rng);
      x1[k] = normal(rng);
    }
    const double t = uniform(rng, 0.0, 1.0);
    const Eigen::VectorXd corr = (x1 - x0 - corrected_velocity(x0, x1, t, xt, cs)) / cs.alpha(t);
    auto total = [&](const GraspVector& y) { return cs.evaluate(y).value; };
    worst = std::max(worst, fd_check_scalar(total, xt, corr, 1e-7));
  }
  MESSAGE("correction term worst rel err " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("cfm_loss: zero field gives |x1 - x0|^2 and gradients match finite differences") {
  FlowConfig cfg;
  cfg.dim = 3;
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.time_freqs = 2;
  cfg.cond_points = 16;
  cfg.cond_hidden = 6;
  cfg.cond_feature = 5;
  cfg.n_tasks = 2;
  cfg.task_dim = 3;
  FlowModel model(cfg, 7);

  Rng rng(8);
  std::vector<FlowObject> objects;
  GripperModel dummy;
  for (int o = 0; o < 2; ++o) {
    FlowObject obj;
    PointCloud c = tosc::testing::asymmetric_blob(40, rng);
    std::vector<std::size_t> task{0, 1, 2, 3, 4};
    obj.condition = make_condition_input(c, task, cfg.cond_points, o);
    objects.push_back(std::move(obj));  // no constraints: plain CFM targets
  }
  std::vector<FlowExample> data;
  for (int i = 0; i < 6; ++i) {
    data.push_back({Eigen::Vector3d(normal(rng), normal(rng), normal(rng)), static_cast<std::size_t>(i % 2)});
  }
  std::vector<const FlowExample*> batch;
  for (auto& d : data) batch.push_back(&d);

  // Gradient check over every parameter.
  for (auto& t : model.params().tensors()) {
    if (t.name.find(".b") != std::string::npos) {
      for (long i = 0; i < t.value.size(); ++i) t.value.data()[i] = 0.1 * normal(rng);
    }
  }
  model.params().zero_grad();
  cfm_loss(model, batch, objects, 11, true);
  std::vector<tosc::testing::Probe> probes;
  for (auto& t : model.params().tensors()) {
    probes.push_back({t.value.data(), t.value.size(),
                      Eigen::Map<const Eigen::VectorXd>(t.grad.data(), t.grad.size())});
  }
  const double worst = tosc::testing::grad_check([&] { return cfm_loss(model, batch, objects, 11); }, probes, 1e-6, 1e-6);
  MESSAGE("cfm loss gradient worst rel err " << worst);
  CHECK(worst < 1e-4);

  // Zero output layer: v == 0, loss = mean |x1 - x0|^2.
  model.params().get("vel.out.w").value.setZero();
  model.params().get("vel.out.b").value.setZero();
  const CfmDraw d = draw_cfm(batch, objects, cfg.dim, 11);
  double expect = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    expect += (data[i].x1.transpose() - d.x0.row(static_cast<long>(i))).squaredNorm();
  }
  expect /= static_cast<double>(data.size());
  CHECK(cfm_loss(model, batch, objects, 11) == doctest::Approx(expect).epsilon(1e-14));
  CHECK((d.target - (Matrix(6, 3) << data[0].x1.transpose(), data[1].x1.transpose(), data[2].x1.transpose(),
                     data[3].x1.transpose(), data[4].x1.transpose(), data[5].x1.transpose()).finished() + d.x0).norm() < 1e-14);
}

TEST_CASE("sample: constant field, single step, determinism, numeric failure") {
  FlowConfig cfg;
  cfg.dim = 4;
  cfg.hidden = 8;
  cfg.layers = 2;
  cfg.conditional = false;
  FlowModel model(cfg, 1);
  RowVector none(0);
  // steps = 1 -> x0 + v(x0, 0).
  Matrix start(2, 4);
  start << 0.1, -0.2, 0.3, 0.4, -1.0, 0.5, 0.0, 2.0;
  const Matrix one = sample_flow_from(model, none, start, 1);
  const Matrix expect = start + model.velocity(start, Eigen::VectorXd::Zero(2), Matrix(2, 0));
  CHECK((one - expect).norm() < 1e-15);
  CHECK((sample_flow(model, none, 5, 10, 3) - sample_flow(model, none, 5, 10, 3)).norm() == 0.0);
  // Sample i does not depend on how many samples are drawn.
  CHECK((sample_flow(model, none, 5, 10, 3).row(2) - sample_flow(model, none, 3, 10, 3).row(2)).norm() < 1e-12);

  // Constant field c: exact for any step count.
  Eigen::RowVectorXd c(4);
  c << 0.5, -1.0, 2.0, 0.25;
  model.params().get("vel.out.w").value.setZero();
  model.params().get("vel.out.b").value = c;
  for (int steps : {1, 7, 50}) {
    const Matrix out = sample_flow_from(model, none, start, steps);
    CHECK((out - (start.rowwise() + c)).norm() < 1e-12);
  }
  model.params().get("vel.out.b").value(0, 1) = std::nan("");
  CHECK(throws_code(ErrorCode::NumericFailure, [&] { sample_flow_from(model, none, start, 5); }));
}

TEST_CASE("toy 2D mixture: unconditional flow matching reproduces component statistics") {
  const Eigen::Vector2d m_a(-1.5, 0.0), m_b(1.5, 1.0);
  Eigen::Matrix2d c_a, c_b;
  c_a << 0.25, 0.10, 0.10, 0.16;
  c_b << 0.09, 0.0, 0.0, 0.36;
  const Eigen::Matrix2d l_a = c_a.llt().matrixL(), l_b = c_b.llt().matrixL();
  Rng rng(21);
  std::vector<FlowExample> data;
  for (int i = 0; i < 4000; ++i) {
    const Eigen::Vector2d z(normal(rng), normal(rng));
    data.push_back({i % 2 == 0 ? Eigen::VectorXd(m_a + l_a * z) : Eigen::VectorXd(m_b + l_b * z), 0});
  }
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.hidden = 128;
  cfg.layers = 3;
  cfg.conditional = false;
  FlowModel model(cfg, 5);
  FlowTrainConfig tc;
  tc.epochs = 120;
  tc.batch = 256;
  tc.lr = 2e-3;
  tc.seed = 9;
  std::vector<double> step_losses;
  const auto t0 = std::chrono::steady_clock::now();
  auto log = train_flowgrasp(model, data, {}, tc);
  MESSAGE("toy training " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                          << " s, loss " << log.front().loss << " -> " << log.back().loss);
  CHECK(log.size() == 120);
  CHECK(log.back().loss < log.front().loss);

  const Matrix s = sample_flow(model, RowVector(0), 5000, 50, 77);
  Eigen::Vector2d sum[2] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  Eigen::Matrix2d sq[2] = {Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Zero()};
  int count[2] = {0, 0};
  for (long i = 0; i < s.rows(); ++i) {
    const Eigen::Vector2d p = s.row(i).transpose();
    const int k = (p - m_a).norm() < (p - m_b).norm() ? 0 : 1;
    sum[k] += p;
    sq[k] += p * p.transpose();
    ++count[k];
  }
  const Eigen::Vector2d means[2] = {m_a, m_b};
  const Eigen::Matrix2d covs[2] = {c_a, c_b};
  for (int k = 0; k < 2; ++k) {
    const Eigen::Vector2d mu = sum[k] / count[k];
    const Eigen::Matrix2d cov = sq[k] / count[k] - mu * mu.transpose();
    MESSAGE("component " << k << " n=" << count[k] << " mean err " << (mu - means[k]).cwiseAbs().maxCoeff()
                         << " cov err " << (cov - covs[k]).cwiseAbs().maxCoeff());
    CHECK((mu - means[k]).cwiseAbs().maxCoeff() < 0.1);
    CHECK((cov - covs[k]).cwiseAbs().maxCoeff() < 0.1);
  }

  // Step halving on the trained field: Euler is first order once the step
  // resolves the field (below ~32 steps the ratio is still pre-asymptotic).
  Matrix x0(200, 2);
  Rng r2(3);
  for (long i = 0; i < x0.size(); ++i) x0.data()[i] = normal(r2);
  const Matrix a = sample_flow_from(model, RowVector(0), x0, 64);
  const Matrix b = sample_flow_from(model, RowVector(0), x0, 128);
  const Matrix c = sample_flow_from(model, RowVector(0), x0, 256);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  MESSAGE("empirical Euler order " << order);
  CHECK(order > 0.8);
  CHECK(order < 1.2);
}

TEST_CASE("cfm loss decreases over the first 100 steps on the toy task") {
  Rng rng(22);
  std::vector<FlowExample> data;
  for (int i = 0; i < 640; ++i) {
    data.push_back({Eigen::Vector2d(i % 2 ? 1.5 : -1.5, 0.0) + 0.3 * Eigen::Vector2d(normal(rng), normal(rng)), 0});
  }
  FlowConfig cfg;
  cfg.dim = 2;
  cfg.hidden = 64;
  cfg.conditional = false;
  FlowModel model(cfg, 1);
  FlowTrainConfig tc;
  tc.epochs = 10;  // 10 batches per epoch -> 100 steps
  tc.batch = 64;
  auto log = train_flowgrasp(model, data, {}, tc);
  CHECK(log.back().loss < 0.8 * log.front().loss);
}

TEST_CASE("zero constraint weights reproduce plain flow matching bit for bit") {
  GripperModel g;
  FlowConfig cfg;
  cfg.hidden = 32;
  cfg.cond_points = 32;
  cfg.cond_hidden = 16;
  cfg.cond_feature = 16;
  cfg.task_dim = 4;
  Rng rng(30);
  PointCloud c = tosc::testing::asymmetric_blob(200, rng);
  std::vector<std::size_t> task;
  for (std::size_t i = 0; i < 40; ++i) task.push_back(i);
  ConstraintWeights zero{0.0, 0.0, 0.0};
  std::vector<FlowObject> with_zero{make_flow_object(c, task, 0, g, cfg, zero, 0.1)};
  std::vector<FlowObject> plain{make_flow_object(c, task, 0, g, cfg, {}, 0.0)};
  std::vector<FlowExample> data;
  for (int i = 0; i < 40; ++i) {
    Eigen::VectorXd x(cfg.dim);
    for (long k = 0; k < x.size(); ++k) x[k] = normal(rng);
    data.push_back({x, 0});
  }
  FlowTrainConfig tc;
  tc.epochs = 3;
  tc.batch = 16;
  FlowModel a(cfg, 1), b(cfg, 1);
  auto la = train_flowgrasp(a, data, with_zero, tc);
  auto lb = train_flowgrasp(b, data, plain, tc);
  for (std::size_t e = 0; e < la.size(); ++e) CHECK(la[e].loss == lb[e].loss);
  for (std::size_t t = 0; t < a.params().tensors().size(); ++t) {
    CHECK((a.params().tensors()[t].value.array() == b.params().tensors()[t].value.array()).all());
  }
  // And a non-zero weight changes the result.
  std::vector<FlowObject> guided{make_flow_object(c, task, 0, g, cfg, {}, 0.5)};
  FlowModel m(cfg, 1);
  auto lg = train_flowgrasp(m, data, guided, tc);
  CHECK(lg.front().loss != la.front().loss);
}

TEST_CASE("oracle grasps on a mug handle") {
  const auto gs = generate_shape(ShapeKind::Mug, default_params(ShapeKind::Mug), 4096, 3);
  const PointCloud handle = gs.cloud.subset(gs.cloud.indices_with_label(region::kHandle));
  GripperModel g;
  const auto t0 = std::chrono::steady_clock::now();
  const auto grasps = synthesize_grasps(g, gs.shape, handle, 6, 1);
  MESSAGE("oracle: " << grasps.size() << " grasps in "
                     << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s");
  CHECK(grasps.size() >= 4);
  const KdTree tree(handle);
  for (const auto& x : grasps) {
    const Mat3 r = rotation_from_6d(x.segment<6>(3));
    CHECK((r.col(0) - x.segment<3>(3)).norm() < 1e-12);
    int contacts = 0;
    for (const auto& tp : fk_fingertips(g, x).points) {
      contacts += std::sqrt(tree.nearest(tp).sq_dist) - g.tip_radius < 0.015;
    }
    CHECK(contacts >= 2);
    for (const auto& sp : hand_spheres(g, x).points) CHECK(gs.shape.sdf(sp) > -0.01);
  }
  CHECK(synthesize_grasps(g, gs.shape, handle, 3, 1) == std::vector<GraspVector>(grasps.begin(), grasps.begin() + 3));
}

TEST_CASE("grasp JSON and flow checkpoint round trips") {
  auto dir = std::filesystem::temp_directory_path() / "tosc_test_flow";
  std::filesystem::create_directories(dir);
  GraspRecord r;
  r.x = Eigen::VectorXd::LinSpaced(15, -1.0, 1.0);
  r.x[3] = 0.1 + 1e-17;
  r.object = "mug-0";
  r.task_text = "pick up by handle";
  r.seed = 12;
  write_grasps(dir / "g.json", {r, r});
  const auto back = read_grasps(dir / "g.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0].x == r.x);
  CHECK(back[1].object == "mug-0");
  CHECK(throws_code(ErrorCode::Io, [&] { read_grasps(dir / "missing.json"); }));

  FlowConfig cfg;
  cfg.hidden = 16;
  FlowModel m(cfg, 3);
  save_flow(dir / "f.ckpt", m);
  auto m2 = load_flow(dir / "f.ckpt");
  CHECK(m2->config().to_json() == cfg.to_json());
  for (std::size_t t = 0; t < m.params().tensors().size(); ++t) {
    CHECK(m.params().tensors()[t].value == m2->params().tensors()[t].value);
  }
  std::filesystem::remove_all(dir);
}
