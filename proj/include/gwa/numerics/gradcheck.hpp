#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gwa/numerics/tape.hpp"

namespace gwa {

// Builds a scalar on the tape from the supplied input variables.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients against central differences with step eps
// for every coordinate of every input. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|).
GradCheckResult gradient_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps = 1e-5);

double gradient_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps = 1e-5);

}  // namespace gwa
