#include "gwa/numerics/kernels.hpp"

#include <cmath>

namespace gwa::kernels {

void gemm_acc(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
}

void affine(const double* a, std::size_t m, std::size_t k, const double* w, const double* bias, std::size_t n,
            double* out) {
  for (std::size_t i = 0; i < m; ++i) {
    double* oi = out + i * n;
    for (std::size_t j = 0; j < n; ++j) oi[j] = bias ? bias[j] : 0.0;
  }
  gemm_acc(a, m, k, w, n, out);
}

void conv_row(std::span<const double* const> taps, const double* w, const double* bias, std::size_t cin,
              std::size_t cout, double* out) {
  for (std::size_t j = 0; j < cout; ++j) out[j] = bias ? bias[j] : 0.0;
  for (std::size_t t = 0; t < taps.size(); ++t) {
    if (taps[t] == nullptr) continue;
    gemm_acc(taps[t], 1, cin, w + t * cin * cout, cout, out);
  }
}

void mix_nodes(const double* adj, std::size_t n, const double* x, std::size_t c, double* out) {
  for (std::size_t i = 0; i < n * c; ++i) out[i] = 0.0;
  gemm_acc(adj, n, n, x, c, out);
}

void relu(const double* x, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void scaled_sigmoid(const double* x, std::size_t n, const double* scale, std::size_t period, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = scale[i % period] * sigmoid(x[i]);
}

}  // namespace gwa::kernels
