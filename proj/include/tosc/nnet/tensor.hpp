#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tosc/common/rng.hpp"

namespace tosc::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Named 2-D parameter with its gradient accumulator and Adam moments.
/// grad is empty until the first zero_grad(), which is how "no gradient
/// yet" is detected.
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  std::vector<long> shape() const { return {value.rows(), value.cols()}; }
  long numel() const { return value.size(); }
};

enum class Init { Zero, One, Xavier, He, Normal002 };

/// Owns every trainable tensor of a model. Tensor addresses are stable, so
/// layers keep raw pointers; a ParamSet is therefore not copyable.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}
  ParamSet(const ParamSet&) = delete;
  ParamSet& operator=(const ParamSet&) = delete;

  /// Throws InvalidArgument for duplicate names or empty shapes.
  Tensor& add(const std::string& name, long rows, long cols, Init init);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::deque<Tensor>& tensors() { return tensors_; }
  const std::deque<Tensor>& tensors() const { return tensors_; }

  void zero_grad();
  long numel() const;
  std::uint64_t seed() const { return seed_; }
  long step() const { return step_; }
  void set_step(long s) { step_ = s; }
  Rng& rng() { return rng_; }

  /// Throws NumericFailure if any value or gradient is non-finite.
  void check_finite() const;

 private:
  std::deque<Tensor> tensors_;
  std::uint64_t seed_;
  long step_ = 0;
  Rng rng_;
};

/// Throws NumericFailure naming `what` when m has a NaN or infinity.
void require_finite(const Matrix& m, const char* what);

}  // namespace tosc::nn
