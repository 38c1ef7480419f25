#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "gwa/numerics/tensor.hpp"

namespace gwa {

// Named tensors in a stable (lexicographic) order.
using ParameterSet = std::map<std::string, Tensor>;

struct AdamOptions {
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::uint64_t step = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;
};

// One bias-corrected Adam update. Moments are created on the first call;
// every gradient must match its parameter's shape.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

}  // namespace gwa
