#include "tosc/nnet/adam.hpp"

#include <cmath>

#include "tosc/common/error.hpp"

namespace tosc::nn {

void adam_step(ParamSet& params, const AdamConfig& c) {
  require(c.lr >= 0.0 && c.weight_decay >= 0.0, "adam: lr and weight decay must be >= 0");
  require(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0,
          "adam: betas must be in [0, 1)");
  for (const auto& t : params.tensors()) {
    if (t.grad.rows() != t.value.rows() || t.grad.cols() != t.value.cols()) {
      fail(ErrorCode::InvalidState, "adam: missing gradient for " + t.name);
    }
  }
  const long step = params.step() + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (auto& t : params.tensors()) {
    if (t.adam_m.size() != t.value.size()) {
      t.adam_m.setZero(t.value.rows(), t.value.cols());
      t.adam_v.setZero(t.value.rows(), t.value.cols());
    }
    t.adam_m = c.beta1 * t.adam_m + (1.0 - c.beta1) * t.grad;
    t.adam_v = c.beta2 * t.adam_v + (1.0 - c.beta2) * t.grad.cwiseAbs2();
    const auto update =
        (t.adam_m.array() / bc1) / ((t.adam_v.array() / bc2).sqrt() + c.eps);
    t.value.array() -= c.lr * update + c.lr * c.weight_decay * t.value.array();
  }
  params.set_step(step);
}

}  // namespace tosc::nn
