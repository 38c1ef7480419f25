#include "gwa/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gwa/error.hpp"

namespace gwa {
namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
  const double v = f(tape, vars).value().item();
  if (!std::isfinite(v)) throw NumericError("gradient_check: non-finite perturbed evaluation");
  return v;
}

}  // namespace

GradCheckResult gradient_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double eps) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
    Var out = f(tape, vars);
    tape.backward(out);
    for (Var v : vars) analytic.push_back(tape.grad(v));
  }

  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    for (std::size_t i = 0; i < probe[k].size(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double up = evaluate(f, probe);
      probe[k][i] = orig - eps;
      const double down = evaluate(f, probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_input = k;
        result.worst_index = i;
      }
      ++result.coordinates;
    }
  }
  return result;
}

double gradient_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double eps) {
  ScalarFn wrapped = [&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); };
  return gradient_check(wrapped, std::vector<Tensor>{x}, eps).max_relative_error;
}

}  // namespace gwa
