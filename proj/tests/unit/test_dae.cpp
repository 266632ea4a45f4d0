#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/testing.hpp"
#include "tosc/dae/dae.hpp"
#include "tosc/dae/train.hpp"
#include "tosc/nnet/losses.hpp"

using namespace tosc;
using tosc::nn::Matrix;
using tosc::nn::RowVector;
using tosc::testing::throws_code;

namespace {

DaeConfig tiny_config() {
  DaeConfig c;
  c.n_patch = 8;
  c.k_neighbors = 8;
  c.width = 8;
  c.heads = 2;
  c.mlp_dim = 16;
  c.latent = 4;
  c.n_encoder = 1;
  c.n_decoder = 1;
  c.token_hidden = 8;
  c.restore_hidden = 8;
  c.n_restore = 64;
  return c;
}

PointCloud blob(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return tosc::testing::asymmetric_blob(n, rng);
}

// Independent closed form for KL( N(m1, s1^2) || N(m2, s2^2) ).
double kl_oracle(double m1, double s1, double m2, double s2) {
  return std::log(s2 / s1) + (s1 * s1 + (m1 - m2) * (m1 - m2)) / (2.0 * s2 * s2) - 0.5;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

LatentStats stats(std::vector<double> mu, std::vector<double> sigma) {
  LatentStats s;
  s.mu = Eigen::Map<RowVector>(mu.data(), static_cast<long>(mu.size()));
  s.sigma = Eigen::Map<RowVector>(sigma.data(), static_cast<long>(sigma.size()));
  return s;
}

// Small synthetic dataset sample whose ground truth is a perturbed copy of
// the observation.
DatasetSample toy_sample(std::uint64_t seed, bool plausible) {
  DatasetSample s;
  s.partial = blob(64, seed);
  s.partial.labels.assign(64, 1);
  for (std::size_t i = 0; i < 4; ++i) s.partial.labels[i] = 2;
  s.ground_truth = blob(64, seed + 1000);
  s.task = {"pick up by handle", "mug", "handle"};
  s.plausible = plausible;
  return s;
}

}  // namespace

TEST_CASE("tokenize: one token per point and task flags") {
  DaeConfig c = tiny_config();
  c.n_patch = 64;
  c.k_neighbors = 1;
  DaeModel model(c, 1);
  PointCloud cloud = blob(64, 2);
  auto tc = tokenize(model, cloud, {});
  CHECK(tc.tokens.rows() == 64);
  CHECK(tc.positions.rows() == 64);
  CHECK(std::none_of(tc.task_flags.begin(), tc.task_flags.end(), [](bool b) { return b; }));

  // Each center is a distinct cloud point, so with k = 1 the token set is the cloud.
  auto g = patch_geometry(cloud, 64, 1);
  std::vector<std::size_t> centers = g.patches.centers;
  std::sort(centers.begin(), centers.end());
  std::vector<std::size_t> all(64);
  std::iota(all.begin(), all.end(), 0);
  CHECK(centers == all);

  auto tc2 = tokenize(model, cloud, {5});
  CHECK(std::count(tc2.task_flags.begin(), tc2.task_flags.end(), true) == 1);
  CHECK((tc2.positions - tc.positions).norm() == 0.0);
  CHECK((tokenize(model, cloud, {}).tokens - tc.tokens).norm() == 0.0);
}

TEST_CASE("tokenize: task flag iff group intersects the task set") {
  DaeModel model(tiny_config(), 3);
  PointCloud cloud = blob(64, 4);
  std::vector<std::size_t> task{0, 1, 2, 30};
  auto g = patch_geometry(cloud, 8, 8);
  auto flags = task_flags(g, task);
  for (std::size_t j = 0; j < g.patches.size(); ++j) {
    bool hit = false;
    for (auto i : g.patches.groups[j]) hit |= std::find(task.begin(), task.end(), i) != task.end();
    CHECK(flags[j] == hit);
  }
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { patch_geometry(blob(4, 1), 8, 8); }));
}

TEST_CASE("mask_tokens: floor rule and task protection") {
  TokenizedCloud tc;
  tc.tokens = Matrix::Zero(14, 2);
  tc.positions = Matrix::Zero(14, 3);
  tc.task_flags.assign(14, false);
  for (int j = 0; j < 4; ++j) tc.task_flags[j] = true;
  tc.visible_mask.assign(14, true);

  auto none = mask_tokens(tc, 0.0, 1);
  CHECK(std::count(none.visible_mask.begin(), none.visible_mask.end(), false) == 0);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto m = mask_tokens(tc, 0.6, seed);
    CHECK(std::count(m.visible_mask.begin(), m.visible_mask.end(), false) == 6);
    for (int j = 0; j < 4; ++j) CHECK(m.visible_mask[j]);
    CHECK(mask_tokens(tc, 0.6, seed).visible_mask == m.visible_mask);
  }

  TokenizedCloud all_task = tc;
  all_task.task_flags.assign(14, true);
  auto m = mask_tokens(all_task, 0.9, 7);
  CHECK(std::count(m.visible_mask.begin(), m.visible_mask.end(), false) == 0);

  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { mask_tokens(tc, 1.0, 0); }));
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { mask_tokens(tc, -0.1, 0); }));
}

TEST_CASE("encode: permutation invariance, positive sigma, empty visible set") {
  DaeConfig c = tiny_config();
  c.n_encoder = 2;
  DaeModel model(c, 5);
  auto tc = tokenize(model, blob(64, 6), {1, 2, 3});
  auto base = encode(model, tc);
  CHECK((base.stats.sigma.array() > 0.0).all());

  Rng rng(9);
  std::vector<long> perm(tc.tokens.rows());
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    TokenizedCloud p = tc;
    for (std::size_t r = 0; r < perm.size(); ++r) p.tokens.row(r) = tc.tokens.row(perm[r]);
    auto e = encode(model, p);
    CHECK((e.latent - base.latent).norm() / base.latent.norm() < 1e-6);
    CHECK((e.stats.mu - base.stats.mu).norm() <= 1e-6 * (1.0 + base.stats.mu.norm()));
  }
  CHECK((encode(model, tc).latent - base.latent).norm() == 0.0);

  TokenizedCloud hidden = tc;
  hidden.visible_mask.assign(hidden.visible_mask.size(), false);
  CHECK(throws_code(ErrorCode::InvalidState, [&] { encode(model, hidden); }));
}

TEST_CASE("restore: fixed output size, finite, identity before training") {
  DaeConfig c = tiny_config();
  DaeModel model(c, 8);
  for (std::size_t n : {40u, 64u, 150u}) {
    PointCloud cloud = blob(n, n);
    cloud.labels.assign(n, 3);
    PointCloud out = restore(model, cloud, {0});
    CHECK(out.size() == c.n_restore);
    CHECK(out.labels.size() == c.n_restore);
    for (const auto& p : out.points) CHECK(p.allFinite());
    if (n == c.n_restore) {
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) err = std::max(err, (out.points[i] - cloud.points[i]).norm());
      CHECK(err < 1e-12);
    }
  }
  // With random output weights the result stays finite.
  for (auto& t : model.params().tensors()) {
    if (t.name == "restore.out.w") t.value.setConstant(0.3);
  }
  for (const auto& p : restore(model, blob(64, 1), {}).points) CHECK(p.allFinite());
}

TEST_CASE("latent KL and plausibility against closed-form and Monte-Carlo oracles") {
  CHECK(latent_kl(stats({0.0}, {1.0}), 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(latent_kl(stats({0.0}, {1.0}), 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plausibility_from_stats(stats({0, 0, 0}, {1, 1, 1})) ==
        doctest::Approx(sigmoid(0.5)).epsilon(1e-12));
  CHECK(plausibility_from_stats(stats({0, 0, 0}, {1, 1, 1})) == doctest::Approx(0.6225).epsilon(1e-4));
  CHECK(plausibility_from_stats(stats({1, 1}, {1, 1})) == doctest::Approx(0.3775).epsilon(1e-4));
  auto half = stats({0.5}, {1.0});
  CHECK(latent_kl(half, 0.0) == doctest::Approx(0.125));
  CHECK(latent_kl(half, 1.0) == doctest::Approx(0.125));
  CHECK(plausibility_from_stats(half) == doctest::Approx(0.5).epsilon(1e-12));

  // 50 random (mu, sigma) pairs: closed form vs a 1e6-sample estimate of
  // E_q[log q(x) - log p(x)].
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double mu = uniform(rng, -1.5, 1.5);
    const double sigma = uniform(rng, 0.4, 1.8);
    const double target = t % 2 == 0 ? 0.0 : 1.0;
    const double closed = latent_kl(stats({mu}, {sigma}), target);
    CHECK(closed == doctest::Approx(kl_oracle(mu, sigma, target, 1.0)).epsilon(1e-12));
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double z = normal(rng);
      const double x = mu + sigma * z;
      acc += -std::log(sigma) - 0.5 * z * z + 0.5 * (x - target) * (x - target);
    }
    worst = std::max(worst, std::abs(acc / n - closed));
  }
  MESSAGE("worst |MC - closed| = " << worst);
  CHECK(worst < 1e-2);
}

TEST_CASE("plausibility is strictly decreasing in KL to N(0,1)") {
  // Along mu in [0, 0.5] with the other coordinates fixed, KL to N(0,1)
  // rises and KL to N(1,1) falls; the score must fall.
  for (double sigma : {0.5, 1.0, 1.5}) {
    double prev = 2.0, prev_kl0 = -1.0;
    for (int i = 0; i <= 50; ++i) {
      auto s = stats({0.01 * i, 0.2}, {sigma, 1.0});
      const double kl0 = latent_kl(s, 0.0);
      const double score = plausibility_from_stats(s);
      CHECK(kl0 > prev_kl0);
      CHECK(score < prev);
      prev = score;
      prev_kl0 = kl0;
    }
  }
  // Analytic form: d s / d KL0 = -s (1 - s) < 0 at fixed KL1.
  for (double kl0 = 0.0; kl0 < 5.0; kl0 += 0.25) {
    for (double kl1 = 0.0; kl1 < 5.0; kl1 += 0.5) {
      CHECK(sigmoid(-(kl0 + 1e-3) + kl1) < sigmoid(-kl0 + kl1));
    }
  }
}

TEST_CASE("select_and_restore: single, ties, all failed") {
  DaeModel model(tiny_config(), 11);
  Candidate a;
  a.cloud = blob(64, 1);
  a.cloud.labels.assign(64, 1);
  a.task_mask = {0, 1};
  auto one = select_and_restore(model, {a});
  CHECK(one.best_index == 0);
  CHECK(one.restored.size() == 64);

  Candidate failed = a;
  failed.failed = true;
  auto tie = select_and_restore(model, {failed, a, a});
  CHECK(tie.best_index == 1);
  CHECK(std::isnan(tie.scores[0]));
  CHECK(tie.scores[1] == tie.scores[2]);
  CHECK(throws_code(ErrorCode::NoCandidate, [&] { select_and_restore(model, {failed, failed}); }));
}

TEST_CASE("loss_terms: trivial cases") {
  DaeConfig c = tiny_config();
  DaeModel model(c, 12);
  DatasetSample s = toy_sample(1, true);
  s.ground_truth = s.partial;  // untrained decoder is the identity
  DaeExample pos = make_example(c, s);
  DaeExample neg = make_example(c, toy_sample(2, false));
  auto l0 = loss_terms(model, {&pos}, {&neg}, 0.0, 1);
  CHECK(l0.mask == 0.0);
  CHECK(l0.restore == doctest::Approx(0.0).epsilon(1e-20));
  CHECK(l0.total == doctest::Approx(l0.pos_kl + l0.neg_kl + l0.restore + l0.mask));
  auto l6 = loss_terms(model, {&pos}, {&neg}, 0.6, 1);
  CHECK(l6.mask > 0.0);
  CHECK(l6.pos_kl == doctest::Approx(l0.pos_kl));
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { loss_terms(model, {}, {&neg}, 0.6, 1); }));
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { loss_terms(model, {&pos}, {}, 0.6, 1); }));
}

TEST_CASE("loss_terms: analytic gradient matches finite differences") {
  DaeConfig c = tiny_config();
  DaeModel model(c, 13);
  // Non-zero output layer so the restoration path carries gradient. Every
  // group contains its own center at relative position 0, so a zero set-pool
  // bias would sit exactly on the ReLU kink.
  Rng rng(4);
  for (auto& t : model.params().tensors()) {
    if (t.name == "restore.out.w" || t.name == "tok.pool.fc1.b") {
      for (long i = 0; i < t.value.size(); ++i) t.value.data()[i] = 0.05 * normal(rng);
    }
  }
  DaeExample p1 = make_example(c, toy_sample(1, true));
  DaeExample p2 = make_example(c, toy_sample(3, true));
  DaeExample n1 = make_example(c, toy_sample(2, false));
  auto f = [&] { return loss_terms(model, {&p1, &p2}, {&n1}, 0.5, 77).total; };
  model.params().zero_grad();
  loss_terms(model, {&p1, &p2}, {&n1}, 0.5, 77, true);

  std::vector<tosc::testing::Probe> probes;
  for (auto& t : model.params().tensors()) {
    Eigen::VectorXd g = Eigen::Map<const Eigen::VectorXd>(t.grad.data(), t.grad.size());
    probes.push_back({t.value.data(), t.value.size(), g});
  }
  double worst = 0.0;
  for (std::size_t t = 0; t < probes.size(); ++t) {
    std::vector<tosc::testing::Probe> one{probes[t]};
    const double w = tosc::testing::grad_check(f, one, 1e-6, 1e-5);
    if (w > 1e-4) MESSAGE(model.params().tensors()[t].name << " rel err " << w);
    worst = std::max(worst, w);
  }
  MESSAGE("dae total-loss gradient worst rel err " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("train_dae: log length, determinism, class check, checkpoint round trip") {
  DaeConfig c = tiny_config();
  std::vector<DatasetSample> data;
  for (int i = 0; i < 6; ++i) data.push_back(toy_sample(10 + i, i % 2 == 0));
  DaeTrainConfig tc;
  tc.epochs = 3;
  tc.batch = 4;
  tc.seed = 5;

  DaeModel a(c, 1), b(c, 1);
  auto la = train_dae(a, data, tc);
  auto lb = train_dae(b, data, tc);
  CHECK(la.size() == 3);
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i].loss.total == lb[i].loss.total);
  for (std::size_t t = 0; t < a.params().tensors().size(); ++t) {
    CHECK((a.params().tensors()[t].value - b.params().tensors()[t].value).norm() == 0.0);
  }

  std::vector<DatasetSample> one_class(data.begin(), data.begin() + 1);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { DaeModel m(c, 1); train_dae(m, one_class, tc); }));

  auto dir = std::filesystem::temp_directory_path() / "tosc_test_dae";
  std::filesystem::create_directories(dir);
  save_dae(dir / "dae.ckpt", a);
  auto back = load_dae(dir / "dae.ckpt");
  CHECK(back->config().to_json() == c.to_json());
  PointCloud probe = blob(64, 99);
  CHECK(plausibility(*back, probe, {1}) == plausibility(a, probe, {1}));
  write_loss_csv(dir / "loss.csv", la);
  CHECK(std::filesystem::file_size(dir / "loss.csv") > 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("config json round trip and validation") {
  DaeConfig c = tiny_config();
  c.mask_ratio = 0.25;
  CHECK(DaeConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(throws_code(ErrorCode::Config, [] { DaeConfig::from_json("{not json"); }));
  CHECK(throws_code(ErrorCode::InvalidArgument, [] { DaeConfig::from_json(R"({"width": 10, "heads": 4})"); }));
}
