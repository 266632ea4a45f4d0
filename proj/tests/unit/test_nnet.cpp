#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "support/gradcheck.hpp"
#include "support/testing.hpp"
#include "tosc/nnet/adam.hpp"
#include "tosc/nnet/checkpoint.hpp"
#include "tosc/nnet/layers.hpp"
#include "tosc/nnet/losses.hpp"

using namespace tosc;
using namespace tosc::nn;
using tosc::testing::grad_check;
using tosc::testing::Probe;
using tosc::testing::throws_code;

namespace {

constexpr int kTrials = 100;
constexpr double kTol = 1e-4;

Matrix randn(Rng& rng, long r, long c, double s = 1.0) {
  Matrix m(r, c);
  for (long i = 0; i < m.size(); ++i) m.data()[i] = s * normal(rng);
  return m;
}

// Keeps every entry at least `gap` away from zero so ReLU kinks are not hit.
Matrix away_from_zero(Matrix m, double gap) {
  for (long i = 0; i < m.size(); ++i) {
    double& v = m.data()[i];
    if (std::abs(v) < gap) v = v < 0 ? -gap : gap;
  }
  return m;
}

// Probes for every tensor in the set plus the given input.
std::vector<Probe> all_probes(ParamSet& ps) {
  std::vector<Probe> out;
  for (auto& t : ps.tensors()) out.push_back(testing::probe(t.value, t.grad));
  return out;
}

void randomize(ParamSet& ps, Rng& rng, double s = 0.5) {
  for (auto& t : ps.tensors()) t.value = randn(rng, t.value.rows(), t.value.cols(), s);
}

}  // namespace

TEST_CASE("linear: identity passthrough and gradient check") {
  ParamSet ps(1);
  Linear lin(ps, "l", 4, 4);
  lin.weight().value.setIdentity();
  Rng rng(2);
  const Matrix x = randn(rng, 3, 4);
  CHECK((lin.forward(x) - x).norm() == 0.0);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { lin.forward(randn(rng, 3, 5)); }));

  double worst = 0;
  for (int t = 0; t < kTrials; ++t) {
    ParamSet p(t);
    Linear l(p, "l", 5, 3);
    randomize(p, rng);
    Matrix in = randn(rng, 4, 5);
    const Matrix r = randn(rng, 4, 3);
    p.zero_grad();
    const Matrix dx = l.backward(in, r);
    auto probes = all_probes(p);
    probes.push_back(testing::probe(in, dx));
    worst = std::max(worst, grad_check([&] { return l.forward(in).cwiseProduct(r).sum(); }, probes));
  }
  MESSAGE("linear worst rel err " << worst);
  CHECK(worst < kTol);
}

TEST_CASE("activations: gradient check") {
  Rng rng(3);
  double worst = 0;
  for (int t = 0; t < kTrials; ++t) {
    Matrix x = away_from_zero(randn(rng, 3, 6, 2.0), 1e-2);
    const Matrix r = randn(rng, 3, 6);
    std::vector<Probe> p1{testing::probe(x, Matrix(relu_backward(x, r)))};
    worst = std::max(worst, grad_check([&] { return relu(x).cwiseProduct(r).sum(); }, p1));
    std::vector<Probe> p2{testing::probe(x, Matrix(gelu_backward(x, r)))};
    worst = std::max(worst, grad_check([&] { return gelu(x).cwiseProduct(r).sum(); }, p2));
  }
  MESSAGE("activation worst rel err " << worst);
  CHECK(worst < kTol);
  CHECK(gelu(Matrix::Constant(1, 1, 0.0))(0, 0) == 0.0);
  CHECK(gelu(Matrix::Constant(1, 1, 1.0))(0, 0) == doctest::Approx(0.8413447460685429));
}

TEST_CASE("layer norm: normalizes rows and passes gradient check") {
  Rng rng(4);
  double worst = 0;
  for (int t = 0; t < kTrials; ++t) {
    ParamSet p(t);
    LayerNorm ln(p, "ln", 6);
    randomize(p, rng);
    Matrix x = randn(rng, 3, 6, 2.0);
    const Matrix r = randn(rng, 3, 6);
    LayerNorm::Cache c;
    ln.forward(x, c);
    p.zero_grad();
    const Matrix dx = ln.backward(r, c);
    auto probes = all_probes(p);
    probes.push_back(testing::probe(x, dx));
    worst = std::max(worst, grad_check([&] {
                       LayerNorm::Cache cc;
                       return ln.forward(x, cc).cwiseProduct(r).sum();
                     }, probes));
  }
  MESSAGE("layer norm worst rel err " << worst);
  CHECK(worst < kTol);

  ParamSet p(0);
  LayerNorm ln(p, "ln", 5);
  LayerNorm::Cache c;
  const Matrix y = ln.forward(randn(rng, 4, 5, 3.0), c);
  for (long i = 0; i < 4; ++i) {
    CHECK(std::abs(y.row(i).mean()) < 1e-12);
    CHECK(y.row(i).squaredNorm() / 5.0 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("attention: single token returns its value projection") {
  ParamSet p(5);
  Rng rng(5);
  MultiHeadSelfAttention attn(p, "a", 8, 2);
  randomize(p, rng);
  const Matrix x = randn(rng, 1, 8);
  MultiHeadSelfAttention::Cache c;
  const Matrix y = attn.forward(x, c);
  const Matrix want = attn.out_proj().forward(attn.value_proj().forward(x));
  CHECK((y - want).norm() < 1e-12);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { MultiHeadSelfAttention(p, "b", 6, 4); }));
}

TEST_CASE("attention and transformer block: gradient check") {
  Rng rng(6);
  double worst_attn = 0, worst_block = 0;
  for (int t = 0; t < kTrials; ++t) {
    {
      ParamSet p(t);
      MultiHeadSelfAttention attn(p, "a", 8, 2);
      randomize(p, rng);
      Matrix x = randn(rng, 4, 8);
      const Matrix r = randn(rng, 4, 8);
      MultiHeadSelfAttention::Cache c;
      attn.forward(x, c);
      p.zero_grad();
      const Matrix dx = attn.backward(r, c);
      auto probes = all_probes(p);
      probes.push_back(testing::probe(x, dx));
      worst_attn = std::max(worst_attn, grad_check([&] {
                              MultiHeadSelfAttention::Cache cc;
                              return attn.forward(x, cc).cwiseProduct(r).sum();
                            }, probes));
    }
    {
      ParamSet p(t);
      TransformerBlock blk(p, "b", 8, 2, 12);
      randomize(p, rng);
      Matrix x = randn(rng, 3, 8);
      const Matrix r = randn(rng, 3, 8);
      TransformerBlock::Cache c;
      blk.forward(x, c);
      p.zero_grad();
      const Matrix dx = blk.backward(r, c);
      auto probes = all_probes(p);
      probes.push_back(testing::probe(x, dx));
      worst_block = std::max(worst_block, grad_check([&] {
                               TransformerBlock::Cache cc;
                               return blk.forward(x, cc).cwiseProduct(r).sum();
                             }, probes));
    }
  }
  MESSAGE("attention " << worst_attn << " block " << worst_block);
  CHECK(worst_attn < kTol);
  CHECK(worst_block < kTol);
}

TEST_CASE("set pool: max over groups and gradient check") {
  Rng rng(7);
  double worst = 0;
  int done = 0;
  while (done < kTrials) {
    ParamSet p(done);
    SetPool sp(p, "s", 3, 6, 5);
    randomize(p, rng);
    Matrix x = randn(rng, 8, 3);
    const Matrix r = randn(rng, 2, 5);
    SetPool::Cache c;
    sp.forward(x, 4, c);
    // Skip draws too close to a ReLU kink or a max tie for finite differences.
    bool smooth = c.h_pre.cwiseAbs().minCoeff() > 1e-2;
    for (long g = 0; g < 2 && smooth; ++g) {
      for (long j = 0; j < 5 && smooth; ++j) {
        std::vector<double> v;
        for (long i = 0; i < 4; ++i) v.push_back(c.h(g * 4 + i, j));
        std::sort(v.begin(), v.end());
        smooth = v[3] - v[2] > 1e-2;
      }
    }
    if (!smooth) continue;
    ++done;
    p.zero_grad();
    const Matrix dx = sp.backward(r, c);
    auto probes = all_probes(p);
    probes.push_back(testing::probe(x, dx));
    worst = std::max(worst, grad_check([&] {
                       SetPool::Cache cc;
                       return sp.forward(x, 4, cc).cwiseProduct(r).sum();
                     }, probes));
  }
  MESSAGE("set pool worst rel err " << worst);
  CHECK(worst < kTol);

  ParamSet p(1);
  SetPool sp(p, "s", 3, 4, 2);
  SetPool::Cache c;
  const Matrix y = sp.forward(randn(rng, 6, 3), 3, c);
  for (long g = 0; g < 2; ++g) {
    for (long j = 0; j < 2; ++j) {
      CHECK(y(g, j) == c.h.block(g * 3, j, 3, 1).maxCoeff());
    }
  }
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { sp.forward(randn(rng, 7, 3), 3, c); }));
}

TEST_CASE("embedding gradient lands in its row") {
  ParamSet p(8);
  Embedding e(p, "e", 3, 4);
  p.zero_grad();
  const RowVector dy = RowVector::Constant(4, 2.0);
  e.backward(1, dy);
  CHECK(p.get("e").grad.row(1) == dy);
  CHECK(p.get("e").grad.row(0).isZero());
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { e.forward(3); }));
}

TEST_CASE("losses: closed forms and gradient checks") {
  CHECK(gaussian_kl_closed(0, 1, 0, 1) == 0.0);
  CHECK(gaussian_kl_closed(0, 1, 1, 1) == doctest::Approx(0.5));
  RowVector mu = RowVector::Zero(5), h = RowVector::Zero(5);
  CHECK(gaussian_kl(mu, h, 0.0) == 0.0);
  CHECK(gaussian_kl(mu, h, 1.0) == doctest::Approx(0.5).epsilon(1e-15));

  Rng rng(9);
  double worst = 0;
  for (int t = 0; t < kTrials; ++t) {
    RowVector m = randn(rng, 1, 6), hh = randn(rng, 1, 6, 0.5);
    const double target = t % 2;
    RowVector gm, gh;
    gaussian_kl(m, hh, target, &gm, &gh);
    for (long i = 0; i < 6; ++i) {
      CHECK(gaussian_kl(m.segment(i, 1), hh.segment(i, 1), target) ==
            doctest::Approx(gaussian_kl_closed(m[i], std::exp(hh[i]), target, 1.0)).epsilon(1e-12));
    }
    std::vector<Probe> pk{testing::probe(m, gm), testing::probe(hh, gh)};
    worst = std::max(worst, grad_check([&] { return gaussian_kl(m, hh, target); }, pk));

    Matrix a = randn(rng, 3, 4);
    const Matrix b = randn(rng, 3, 4);
    Matrix ga;
    mse(a, b, &ga);
    std::vector<Probe> pm{testing::probe(a, ga)};
    worst = std::max(worst, grad_check([&] { return mse(a, b); }, pm));

    Matrix pc = randn(rng, 7, 3);
    const Matrix gc = randn(rng, 9, 3);
    Matrix gp;
    chamfer_loss(pc, gc, &gp);
    std::vector<Probe> pp{testing::probe(pc, gp)};
    worst = std::max(worst, grad_check([&] { return chamfer_loss(pc, gc); }, pp, 1e-6));
  }
  MESSAGE("loss worst rel err " << worst);
  CHECK(worst < kTol);
  const Matrix same = randn(rng, 5, 3);
  CHECK(chamfer_loss(same, same) == 0.0);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { mse(same, Matrix(2, 3)); }));
}

TEST_CASE("adam: fixtures") {
  {
    ParamSet p(0);
    p.add("x", 1, 1, Init::Zero).value(0, 0) = 3.0;
    CHECK(throws_code(ErrorCode::InvalidState, [&] { adam_step(p, {}); }));
    p.zero_grad();
    adam_step(p, {0.1, 0.0});
    CHECK(p.get("x").value(0, 0) == 3.0);
    CHECK(p.step() == 1);
  }
  {
    ParamSet p(0);
    p.add("x", 1, 1, Init::Zero);
    p.zero_grad();
    p.get("x").grad(0, 0) = 1.0;
    adam_step(p, {0.1, 0.0});
    // m_hat = 1, v_hat = 1: update = -lr * 1 / (1 + eps).
    CHECK(p.get("x").value(0, 0) == doctest::Approx(-0.1).epsilon(1e-9));
  }
  {
    ParamSet p(0);
    p.add("x", 1, 1, Init::Zero).value(0, 0) = -2.0;
    p.zero_grad();
    double before = 2.0;
    for (int i = 0; i < 3; ++i) {
      adam_step(p, {0.1, 0.05});
      const double now = std::abs(p.get("x").value(0, 0));
      CHECK(now < before);
      before = now;
    }
  }
}

TEST_CASE("param set and checkpoint round trip") {
  ParamSet p(42);
  Linear a(p, "a", 3, 4);
  LayerNorm n(p, "n", 4);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { p.add("a.w", 1, 1, Init::Zero); }));
  CHECK(p.numel() == 3 * 4 + 4 + 4 + 4);
  p.set_step(17);
  const auto path = std::filesystem::temp_directory_path() / "tosc_test.ckpt";
  save_checkpoint(path, p, R"({"kind":"test"})");
  CHECK(read_checkpoint_meta(path) == R"({"kind":"test"})");

  ParamSet q(7);
  Linear a2(q, "a", 3, 4);
  LayerNorm n2(q, "n", 4);
  CHECK(load_checkpoint(path, q) == R"({"kind":"test"})");
  CHECK(q.step() == 17);
  for (std::size_t i = 0; i < p.tensors().size(); ++i) {
    CHECK(p.tensors()[i].value == q.tensors()[i].value);
  }
  ParamSet wrong(0);
  Linear a3(wrong, "a", 3, 5);
  LayerNorm n3(wrong, "n", 5);
  CHECK(throws_code(ErrorCode::InvalidArgument, [&] { load_checkpoint(path, wrong); }));
  std::filesystem::remove(path);
  CHECK(throws_code(ErrorCode::Io, [&] { load_checkpoint(path, q); }));

  ParamSet bad(0);
  bad.add("x", 1, 1, Init::Zero).value(0, 0) = std::nan("");
  CHECK(throws_code(ErrorCode::NumericFailure, [&] { bad.check_finite(); }));
}
