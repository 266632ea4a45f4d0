#pragma once

#include "tosc/nnet/tensor.hpp"

namespace tosc::nn {

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;  // decoupled (AdamW)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam step with decoupled weight decay over every
/// tensor; increments the ParamSet step counter. Throws InvalidState when a
/// tensor has no gradient buffer (zero_grad() never called).
void adam_step(ParamSet& params, const AdamConfig& config);

}  // namespace tosc::nn
