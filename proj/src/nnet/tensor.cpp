#include "tosc/nnet/tensor.hpp"

#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc::nn {

Tensor& ParamSet::add(const std::string& name, long rows, long cols, Init init) {
  require(rows > 0 && cols > 0, "param " + name + ": empty shape");
  require(!contains(name), "param " + name + ": duplicate name");
  Tensor& t = tensors_.emplace_back();
  t.name = name;
  t.value.resize(rows, cols);
  switch (init) {
    case Init::Zero:
      t.value.setZero();
      break;
    case Init::One:
      t.value.setOnes();
      break;
    case Init::Xavier: {
      const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (long i = 0; i < t.value.size(); ++i) t.value.data()[i] = uniform(rng_, -a, a);
      break;
    }
    case Init::He: {
      const double a = std::sqrt(6.0 / static_cast<double>(rows));
      for (long i = 0; i < t.value.size(); ++i) t.value.data()[i] = uniform(rng_, -a, a);
      break;
    }
    case Init::Normal002:
      for (long i = 0; i < t.value.size(); ++i) t.value.data()[i] = 0.02 * normal(rng_);
      break;
  }
  return t;
}

Tensor& ParamSet::get(const std::string& name) {
  for (auto& t : tensors_) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::InvalidArgument, "unknown parameter " + name);
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  fail(ErrorCode::InvalidArgument, "unknown parameter " + name);
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return true;
  }
  return false;
}

void ParamSet::zero_grad() {
  for (auto& t : tensors_) t.grad.setZero(t.value.rows(), t.value.cols());
}

long ParamSet::numel() const {
  long n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

void ParamSet::check_finite() const {
  for (const auto& t : tensors_) {
    require_finite(t.value, t.name.c_str());
    if (t.grad.size() > 0) require_finite(t.grad, t.name.c_str());
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) fail(ErrorCode::NumericFailure, std::string("non-finite values in ") + what);
}

}  // namespace tosc::nn
