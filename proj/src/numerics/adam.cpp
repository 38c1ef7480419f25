#include "gwa/numerics/adam.hpp"

#include <cmath>

#include "gwa/error.hpp"

namespace gwa {

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient set does not match parameters");
  for (const auto& [name, p] : params) {
    auto g = grads.find(name);
    if (g == grads.end()) throw DimensionError("adam_step: missing gradient for " + name);
    if (g->second.shape() != p.shape()) {
      throw DimensionError("adam_step: gradient for " + name + " has shape " + shape_string(g->second.shape()) +
                           ", parameter has " + shape_string(p.shape()));
    }
    require_finite(g->second, name.c_str());
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);

  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    auto [m_it, m_new] = state.first_moment.try_emplace(name, p.shape());
    auto [v_it, v_new] = state.second_moment.try_emplace(name, p.shape());
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    if (m.shape() != p.shape() || v.shape() != p.shape()) {
      throw DimensionError("adam_step: moment shape drifted for " + name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
    require_finite(p, name.c_str());
  }
}

}  // namespace gwa
