#pragma once

#include <string>
#include <vector>

#include "tosc/nnet/tensor.hpp"

namespace tosc::nn {

// Rows are samples/tokens/points, columns are features throughout.
// backward() accumulates parameter gradients (+=) and returns the input
// gradient; inputs are never modified.

class Linear {
 public:
  Linear() = default;
  Linear(ParamSet& ps, const std::string& name, long in, long out, Init init = Init::Xavier);

  Matrix forward(const Matrix& x) const;
  Matrix backward(const Matrix& x, const Matrix& dy) const;

  long in_features() const { return w_->value.rows(); }
  long out_features() const { return w_->value.cols(); }
  Tensor& weight() const { return *w_; }
  Tensor& bias() const { return *b_; }

 private:
  Tensor* w_ = nullptr;
  Tensor* b_ = nullptr;
};

Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& x, const Matrix& dy);
/// Exact GELU, x * Phi(x).
Matrix gelu(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

class LayerNorm {
 public:
  struct Cache {
    Matrix xhat;
    Vector inv_std;
  };

  LayerNorm() = default;
  LayerNorm(ParamSet& ps, const std::string& name, long dim, double eps = 1e-5);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Matrix& dy, const Cache& cache) const;

 private:
  Tensor* gamma_ = nullptr;
  Tensor* beta_ = nullptr;
  double eps_ = 1e-5;
};

/// Multi-head self-attention over the rows of x, with an output projection.
class MultiHeadSelfAttention {
 public:
  struct Cache {
    Matrix x, q, k, v, concat;
    std::vector<Matrix> probs;  // one n x n matrix per head
  };

  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(ParamSet& ps, const std::string& name, long dim, int heads);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Matrix& dy, const Cache& cache) const;

  int heads() const { return heads_; }
  const Linear& value_proj() const { return wv_; }
  const Linear& out_proj() const { return wo_; }

 private:
  Linear wq_, wk_, wv_, wo_;
  int heads_ = 1;
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then + MLP(LN(.)) with GELU.
class TransformerBlock {
 public:
  struct Cache {
    LayerNorm::Cache ln1, ln2;
    MultiHeadSelfAttention::Cache attn;
    Matrix x1, h_in, h_pre;
  };

  TransformerBlock() = default;
  TransformerBlock(ParamSet& ps, const std::string& name, long dim, int heads, long mlp_dim);

  Matrix forward(const Matrix& x, Cache& cache) const;
  Matrix backward(const Matrix& dy, const Cache& cache) const;

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadSelfAttention attn_;
  Linear fc1_, fc2_;
};

/// Shared per-point MLP (linear-relu-linear) followed by a max-pool over each
/// consecutive block of `group` rows. Ties in the max go to the first row.
class SetPool {
 public:
  struct Cache {
    Matrix x, h_pre, h;
    std::vector<long> argmax;  // (groups x out) flattened row-major
  };

  SetPool() = default;
  SetPool(ParamSet& ps, const std::string& name, long in, long hidden, long out);

  /// x has groups * group rows; returns groups x out.
  Matrix forward(const Matrix& x, long group, Cache& cache) const;
  Matrix backward(const Matrix& dy, const Cache& cache) const;

 private:
  Linear fc1_, fc2_;
};

/// Lookup table: row i is the embedding of symbol i.
class Embedding {
 public:
  Embedding() = default;
  Embedding(ParamSet& ps, const std::string& name, long count, long dim);

  RowVector forward(long index) const;
  void backward(long index, const RowVector& dy) const;
  long count() const { return table_->value.rows(); }

 private:
  Tensor* table_ = nullptr;
};

}  // namespace tosc::nn
