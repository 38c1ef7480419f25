#pragma once

// Helpers shared by the test binaries. The oracles here are written from the
// metric and normalization definitions, without calling the library code
// they check.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gwa/graph.hpp"
#include "gwa/network.hpp"
#include "gwa/numerics/tensor.hpp"

namespace gwa::test {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Boxes in [0,1] for every node and frame.
inline GraphSequence random_sequence(std::size_t frames, std::size_t nodes, std::mt19937_64& rng) {
  return GraphSequence{random_tensor({frames, nodes, kNodeFeatures}, rng, 0.0, 1.0)};
}

inline NodeRoster roster_of(std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("node" + std::to_string(i));
  return NodeRoster(labels);
}

// Reduced widths, full depth.
inline ModelConfig small_config(std::size_t nodes = 4, std::size_t classes = 2, std::size_t width = 4) {
  ModelConfig c;
  c.num_nodes = nodes;
  c.num_classes = classes;
  c.gc_channels = width;
  c.tcn_channels = width;
  c.hubs = {0, 1};
  return c;
}

// Direct Lambda^-1/2 (A + I) Lambda^-1/2, one entry at a time.
inline Tensor brute_normalize(const Tensor& a) {
  const std::size_t n = a.rows();
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) degree[i] += a(i, j) + (i == j ? 1.0 : 0.0);
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(degree[i] * degree[j]);
  return out;
}

// Frame-by-frame metric loops.
struct NaiveMetrics {
  std::optional<double> in, w, p, e;
};

inline std::optional<double> mean_of(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

inline NaiveMetrics naive_metrics(const std::vector<double>& pred, const std::vector<double>& gt, double h) {
  double s_in = 0, s_out = 0, s_p = 0, s_e = 0;
  std::size_t n_in = 0, n_out = 0, n_p = 0, n_e = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double err = std::abs(pred[t] - gt[t]);
    if (gt[t] > 0 && gt[t] < h) {
      s_in += err;
      ++n_in;
    }
    if (gt[t] == h) {
      s_out += err;
      ++n_out;
    }
    if (pred[t] > 0.1 * h && pred[t] < 0.9 * h) {
      s_p += err;
      ++n_p;
    }
    if (gt[t] > 0 && gt[t] <= 0.1 * h) {
      s_e += err;
      ++n_e;
    }
  }
  NaiveMetrics m;
  m.in = mean_of(s_in, n_in);
  m.p = mean_of(s_p, n_p);
  m.e = mean_of(s_e, n_e);
  if (m.in && n_out > 0) m.w = 0.5 * (*m.in + s_out / static_cast<double>(n_out));
  return m;
}

// Remaining minutes by scanning forward from every frame.
inline std::vector<double> naive_remaining(const std::vector<bool>& present, double h) {
  std::vector<double> out(present.size(), h);
  for (std::size_t t = 0; t < present.size(); ++t) {
    for (std::size_t u = t; u < present.size(); ++u) {
      if (present[u]) {
        out[t] = std::min(h, static_cast<double>(u - t) / 60.0);
        break;
      }
    }
  }
  return out;
}

}  // namespace gwa::test
