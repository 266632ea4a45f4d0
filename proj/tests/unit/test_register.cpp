#include <cmath>
#include <set>

#include "doctest.h"
#include "support/oracles.hpp"
#include "support/testing.hpp"
#include "tosc/geom/metrics.hpp"
#include "tosc/reg/fuse.hpp"
#include "tosc/reg/registration.hpp"

using namespace tosc;
using tosc::testing::asymmetric_blob;
using tosc::testing::random_rotation;
using tosc::testing::throws_code;

namespace {

constexpr double kPi = 3.14159265358979323846;

PointCloud with_label(PointCloud c, RegionId id) {
  c.labels.assign(c.size(), id);
  return c;
}

double pair_cost(const std::vector<WeightedPair>& pairs, const SimilarityTransform& x) {
  double s = 0;
  for (const auto& p : pairs) s += p.weight * (p.target - x.apply(p.source)).squaredNorm();
  return s;
}

}  // namespace

TEST_CASE("similarity transform algebra and 13-scalar encoding") {
  Rng rng(1);
  SimilarityTransform x;
  x.scale = 1.3;
  x.rotation = random_rotation(rng, 2.0);
  x.translation = Vec3(0.1, -2, 3);
  const Vec3 p(0.3, 0.4, -0.5);
  CHECK((x.inverse().apply(x.apply(p)) - p).norm() < 1e-12);
  CHECK((x.compose(x.inverse()).apply(p) - p).norm() < 1e-12);
  const auto y = SimilarityTransform::from_array(x.to_array());
  CHECK((y.apply(p) - x.apply(p)).norm() == 0.0);
  auto bad = x.to_array();
  bad[0] = -1;
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { SimilarityTransform::from_array(bad); }));
  bad = x.to_array();
  bad[1] = -bad[1], bad[2] = -bad[2], bad[3] = -bad[3];  // flip first row: reflection
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { SimilarityTransform::from_array(bad); }));
}

TEST_CASE("weighted procrustes is a stationary minimum and rejects reflections") {
  Rng rng(2);
  std::vector<WeightedPair> pairs;
  for (int i = 0; i < 60; ++i) {
    const Vec3 s(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    // Mirrored target: the unconstrained optimum would be a reflection.
    const Vec3 t(-s.x() + 0.05 * normal(rng), s.y(), s.z());
    pairs.push_back({s, t, uniform(rng, 0.1, 2.0)});
  }
  const auto x = weighted_procrustes(pairs);
  CHECK(x.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  const double best = pair_cost(pairs, x);
  for (int trial = 0; trial < 200; ++trial) {
    SimilarityTransform y = x;
    y.scale *= 1.0 + 1e-3 * normal(rng);
    y.rotation = random_rotation(rng, 1e-2) * y.rotation;
    y.translation += 1e-3 * Vec3(normal(rng), normal(rng), normal(rng));
    CHECK(pair_cost(pairs, y) >= best - 1e-12);
  }
}

TEST_CASE("icp: identical clouds give the identity") {
  Rng rng(4);
  const auto c = asymmetric_blob(500, rng);
  const auto r = task_weighted_icp(c, c, PointCloud{}, PointCloud{});
  CHECK(r.transform.scale == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rotation_angle(r.transform.rotation, Mat3::Identity()) < 1e-9);
  CHECK(r.transform.translation.norm() < 1e-12);
  CHECK(r.objective < 1e-20);
}

TEST_CASE("icp recovers random similarity transforms") {
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(77, "icp-recovery", trial));
    const auto source = asymmetric_blob(400, rng);
    SimilarityTransform truth;
    truth.scale = uniform(rng, 0.8, 1.2);
    truth.rotation = random_rotation(rng, 30.0 * kPi / 180.0);
    truth.translation = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2));
    const auto target = truth.apply(source);
    const auto r = task_weighted_icp(target, source, PointCloud{}, PointCloud{});
    for (std::size_t i = 1; i < r.trace.size(); ++i) REQUIRE(r.trace[i] <= r.trace[i - 1]);
    const bool good = std::abs(r.transform.scale - truth.scale) < 1e-3 &&
                      rotation_angle(r.transform.rotation, truth.rotation) < 1e-2 &&
                      (r.transform.translation - truth.translation).norm() < 1e-3;
    ok += good ? 1 : 0;
  }
  MESSAGE("recovered " << ok << "/100");
  CHECK(ok >= 95);
}

TEST_CASE("icp objective matches the brute-force chamfer oracle") {
  Rng rng(5);
  const auto t = asymmetric_blob(200, rng);
  const auto s = asymmetric_blob(150, rng);
  const auto tt = t.subset(std::vector<std::size_t>{0, 5, 10, 15, 20});
  const auto st = s.subset(std::vector<std::size_t>{0, 5, 10});
  SimilarityTransform x;
  x.scale = 1.1;
  x.rotation = random_rotation(rng, 0.4);
  x.translation = Vec3(0.01, 0.02, -0.03);
  const double want =
      oracle::chamfer(t, x.apply(s), true) + 2.5 * oracle::chamfer(tt, x.apply(st), true);
  CHECK(registration_objective(t, s, tt, st, 2.5, x) == doctest::Approx(want).epsilon(1e-12));
  const auto r = task_weighted_icp(t, s, tt, st, {2.5, 1e-7, 50});
  CHECK(r.objective == doctest::Approx(registration_objective(t, s, tt, st, 2.5, r.transform)));
  CHECK(r.objective <= r.initial_objective);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
  CHECK(r.iterations <= 50);
}

TEST_CASE("w_task = 0 is bitwise plain scaled icp") {
  Rng rng(6);
  const auto t = asymmetric_blob(300, rng);
  SimilarityTransform x;
  x.scale = 0.9;
  x.rotation = random_rotation(rng, 0.3);
  auto s = x.apply(asymmetric_blob(300, rng));
  const auto tt = t.subset(std::vector<std::size_t>{1, 2, 3, 4});
  const auto st = s.subset(std::vector<std::size_t>{7, 8, 9});
  const auto a = task_weighted_icp(t, s, tt, st, {0.0, 1e-7, 50});
  const auto b = task_weighted_icp(t, s, PointCloud{}, PointCloud{}, {0.0, 1e-7, 50});
  CHECK(a.trace == b.trace);
  CHECK(a.transform.to_array() == b.transform.to_array());
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("large w_task favours the task region when global and task optima conflict") {
  // Target: body cluster plus a task knob. Source: same body, knob shifted sideways.
  Rng rng(8);
  PointCloud body, knob_t, knob_s;
  for (int i = 0; i < 600; ++i) {
    Vec3 d(normal(rng), normal(rng), normal(rng));
    d.normalize();
    body.points.emplace_back(0.5 * d.x(), 0.25 * d.y(), 0.15 * d.z());
  }
  for (int i = 0; i < 100; ++i) {
    Vec3 d(normal(rng), normal(rng), normal(rng));
    d.normalize();
    knob_t.points.push_back(Vec3(0.7, 0.0, 0.0) + 0.06 * d);
    knob_s.points.push_back(Vec3(0.7, 0.15, 0.0) + 0.06 * d);
  }
  const auto target = concat(body, knob_t);
  const auto source = concat(body, knob_s);
  const auto plain = task_weighted_icp(target, source, knob_t, knob_s, {0.0, 1e-7, 50});
  const auto heavy = task_weighted_icp(target, source, knob_t, knob_s, {50.0, 1e-7, 50});
  const double cd_plain = chamfer(knob_t, plain.transform.apply(knob_s));
  const double cd_heavy = chamfer(knob_t, heavy.transform.apply(knob_s));
  MESSAGE("task CD plain " << cd_plain << " heavy " << cd_heavy);
  CHECK(cd_heavy < cd_plain);
}

TEST_CASE("icp error contract") {
  Rng rng(9);
  const auto c = asymmetric_blob(50, rng);
  CHECK(throws_code(ErrorCode::InvalidArgument,
                    [&] { task_weighted_icp(PointCloud{}, c, PointCloud{}, PointCloud{}); }));
  CHECK(throws_code(ErrorCode::InvalidArgument,
                    [&] { task_weighted_icp(c, PointCloud{}, PointCloud{}, PointCloud{}); }));
  PointCloud flat;
  flat.points.assign(10, Vec3(1, 2, 3));
  CHECK(throws_code(ErrorCode::DegenerateGeometry,
                    [&] { task_weighted_icp(c, flat, PointCloud{}, PointCloud{}); }));
}

TEST_CASE("fuse: identical clouds fully deduplicate") {
  Rng rng(10);
  const auto c = with_label(asymmetric_blob(300, rng), 3);
  const auto out = fuse_with_provenance(c, c, c.size());
  REQUIRE(out.cloud.size() == c.size());
  std::set<std::tuple<double, double, double>> a, b;
  for (const auto& p : c.points) a.insert({p.x(), p.y(), p.z()});
  for (const auto& p : out.cloud.points) b.insert({p.x(), p.y(), p.z()});
  CHECK(a == b);
  for (bool f : out.from_input) CHECK(f);
}

TEST_CASE("fuse: complementary hemispheres improve coverage") {
  Rng rng(11);
  PointCloud sphere;
  sphere.points = oracle::sphere_points(4096, rng, 1.0, Vec3::Zero());
  PointCloud top, bottom;
  for (const auto& p : sphere.points) (p.z() >= 0 ? top : bottom).points.push_back(p);
  top = with_label(top, 0);
  bottom = with_label(bottom, 1);
  const auto out = fuse_with_provenance(top, bottom, 2048);
  REQUIRE(out.cloud.size() == 2048);
  CHECK(chamfer(out.cloud, sphere) < chamfer(top, sphere));
  int lower = 0;
  for (const auto& p : out.cloud.points) lower += p.z() < 0 ? 1 : 0;
  CHECK(lower > 600);
  for (std::size_t i = 0; i < out.cloud.size(); ++i) {
    CHECK(out.cloud.labels[i] == (out.from_input[i] ? 0 : 1));
  }
}

TEST_CASE("fuse: sizes, padding, labels, errors") {
  Rng rng(12);
  const auto a = with_label(asymmetric_blob(20, rng), 1);
  const auto b = with_label(asymmetric_blob(15, rng), 4);
  for (std::size_t n : {1u, 7u, 35u, 100u}) {
    const auto out = fuse_with_provenance(a, b, n);
    REQUIRE(out.cloud.size() == n);
    CHECK(out.from_input[0]);
    for (auto l : out.cloud.labels) CHECK((l == 1 || l == 4));
  }
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { fuse(a, b, 0); }));
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { fuse(PointCloud{}, b, 3); }));
}
