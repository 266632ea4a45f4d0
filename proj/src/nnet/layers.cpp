#include "tosc/nnet/layers.hpp"

#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc::nn {

namespace {

void check_cols(const Matrix& x, long cols, const char* what) {
  if (x.cols() != cols) {
    fail(ErrorCode::InvalidArgument, std::string(what) + ": expected " + std::to_string(cols) +
                                         " columns, got " + std::to_string(x.cols()));
  }
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Linear::Linear(ParamSet& ps, const std::string& name, long in, long out, Init init)
    : w_(&ps.add(name + ".w", in, out, init)), b_(&ps.add(name + ".b", 1, out, Init::Zero)) {}

Matrix Linear::forward(const Matrix& x) const {
  check_cols(x, w_->value.rows(), "linear");
  Matrix y = x * w_->value;
  y.rowwise() += b_->value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& dy) const {
  check_cols(dy, w_->value.cols(), "linear backward");
  w_->grad.noalias() += x.transpose() * dy;
  b_->grad.row(0) += dy.colwise().sum();
  return dy * w_->value.transpose();
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  return (x.array() > 0.0).select(dy, 0.0);
}

Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); });
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  Matrix d = x.unaryExpr([](double v) {
    return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
  });
  return d.cwiseProduct(dy);
}

LayerNorm::LayerNorm(ParamSet& ps, const std::string& name, long dim, double eps)
    : gamma_(&ps.add(name + ".gamma", 1, dim, Init::One)),
      beta_(&ps.add(name + ".beta", 1, dim, Init::Zero)),
      eps_(eps) {}

Matrix LayerNorm::forward(const Matrix& x, Cache& c) const {
  check_cols(x, gamma_->value.cols(), "layer_norm");
  const long d = x.cols();
  c.xhat.resize(x.rows(), d);
  c.inv_std.resize(x.rows());
  for (long i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().sum() / static_cast<double>(d);
    c.inv_std[i] = 1.0 / std::sqrt(var + eps_);
    c.xhat.row(i) = (x.row(i).array() - mean) * c.inv_std[i];
  }
  Matrix y = c.xhat.array().rowwise() * gamma_->value.row(0).array();
  y.rowwise() += beta_->value.row(0);
  return y;
}

Matrix LayerNorm::backward(const Matrix& dy, const Cache& c) const {
  gamma_->grad.row(0) += dy.cwiseProduct(c.xhat).colwise().sum();
  beta_->grad.row(0) += dy.colwise().sum();
  const Matrix g = dy.array().rowwise() * gamma_->value.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (long i = 0; i < dy.rows(); ++i) {
    const double mg = g.row(i).mean();
    const double mgx = g.row(i).dot(c.xhat.row(i)) / static_cast<double>(dy.cols());
    dx.row(i) = (g.row(i).array() - mg - c.xhat.row(i).array() * mgx) * c.inv_std[i];
  }
  return dx;
}

MultiHeadSelfAttention::MultiHeadSelfAttention(ParamSet& ps, const std::string& name, long dim,
                                               int heads)
    : wq_(ps, name + ".q", dim, dim),
      wk_(ps, name + ".k", dim, dim),
      wv_(ps, name + ".v", dim, dim),
      wo_(ps, name + ".o", dim, dim),
      heads_(heads) {
  require(heads >= 1 && dim % heads == 0, "attention: dim must be divisible by heads");
}

Matrix MultiHeadSelfAttention::forward(const Matrix& x, Cache& c) const {
  require(x.rows() >= 1, "attention: no tokens");
  c.x = x;
  c.q = wq_.forward(x);
  c.k = wk_.forward(x);
  c.v = wv_.forward(x);
  const long n = x.rows(), dh = x.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.concat.resize(n, x.cols());
  c.probs.resize(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    Matrix s = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
    for (long i = 0; i < n; ++i) {
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      s.row(i) /= s.row(i).sum();
    }
    c.concat.middleCols(h * dh, dh).noalias() = s * c.v.middleCols(h * dh, dh);
    c.probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return wo_.forward(c.concat);
}

Matrix MultiHeadSelfAttention::backward(const Matrix& dy, const Cache& c) const {
  const Matrix dconcat = wo_.backward(c.concat, dy);
  const long n = c.x.rows(), dh = c.x.cols() / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix dq(n, c.x.cols()), dk(n, c.x.cols()), dv(n, c.x.cols());
  for (int h = 0; h < heads_; ++h) {
    const Matrix& p = c.probs[static_cast<std::size_t>(h)];
    const auto dout = dconcat.middleCols(h * dh, dh);
    dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
    const Matrix dp = dout * c.v.middleCols(h * dh, dh).transpose();
    Matrix ds = p.cwiseProduct(dp);
    const Vector rs = ds.rowwise().sum();
    ds -= (p.array().colwise() * rs.array()).matrix();
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  Matrix dx = wq_.backward(c.x, dq);
  dx += wk_.backward(c.x, dk);
  dx += wv_.backward(c.x, dv);
  return dx;
}

TransformerBlock::TransformerBlock(ParamSet& ps, const std::string& name, long dim, int heads,
                                   long mlp_dim)
    : ln1_(ps, name + ".ln1", dim),
      ln2_(ps, name + ".ln2", dim),
      attn_(ps, name + ".attn", dim, heads),
      fc1_(ps, name + ".fc1", dim, mlp_dim),
      fc2_(ps, name + ".fc2", mlp_dim, dim) {}

Matrix TransformerBlock::forward(const Matrix& x, Cache& c) const {
  c.x1 = x + attn_.forward(ln1_.forward(x, c.ln1), c.attn);
  c.h_in = ln2_.forward(c.x1, c.ln2);
  c.h_pre = fc1_.forward(c.h_in);
  return c.x1 + fc2_.forward(gelu(c.h_pre));
}

Matrix TransformerBlock::backward(const Matrix& dy, const Cache& c) const {
  const Matrix dh = fc2_.backward(gelu(c.h_pre), dy);
  const Matrix dpre = gelu_backward(c.h_pre, dh);
  Matrix dx1 = dy + ln2_.backward(fc1_.backward(c.h_in, dpre), c.ln2);
  return dx1 + ln1_.backward(attn_.backward(dx1, c.attn), c.ln1);
}

SetPool::SetPool(ParamSet& ps, const std::string& name, long in, long hidden, long out)
    : fc1_(ps, name + ".fc1", in, hidden, Init::He), fc2_(ps, name + ".fc2", hidden, out) {}

Matrix SetPool::forward(const Matrix& x, long group, Cache& c) const {
  require(group >= 1 && x.rows() % group == 0, "set_pool: rows must be a multiple of group");
  c.x = x;
  c.h_pre = fc1_.forward(x);
  c.h = fc2_.forward(relu(c.h_pre));
  const long groups = x.rows() / group, out = c.h.cols();
  Matrix y(groups, out);
  c.argmax.assign(static_cast<std::size_t>(groups * out), 0);
  for (long g = 0; g < groups; ++g) {
    for (long j = 0; j < out; ++j) {
      long best = g * group;
      double v = c.h(best, j);
      for (long r = best + 1; r < (g + 1) * group; ++r) {
        if (c.h(r, j) > v) {
          v = c.h(r, j);
          best = r;
        }
      }
      y(g, j) = v;
      c.argmax[static_cast<std::size_t>(g * out + j)] = best;
    }
  }
  return y;
}

Matrix SetPool::backward(const Matrix& dy, const Cache& c) const {
  Matrix dh = Matrix::Zero(c.h.rows(), c.h.cols());
  const long out = c.h.cols();
  for (long g = 0; g < dy.rows(); ++g) {
    for (long j = 0; j < out; ++j) dh(c.argmax[static_cast<std::size_t>(g * out + j)], j) += dy(g, j);
  }
  const Matrix da = fc2_.backward(relu(c.h_pre), dh);
  return fc1_.backward(c.x, relu_backward(c.h_pre, da));
}

Embedding::Embedding(ParamSet& ps, const std::string& name, long count, long dim)
    : table_(&ps.add(name, count, dim, Init::Normal002)) {}

RowVector Embedding::forward(long index) const {
  require(index >= 0 && index < table_->value.rows(), "embedding: index out of range");
  return table_->value.row(index);
}

void Embedding::backward(long index, const RowVector& dy) const {
  table_->grad.row(index) += dy;
}

}  // namespace tosc::nn
