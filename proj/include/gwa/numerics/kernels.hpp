#pragma once

#include <cstddef>
#include <span>

// Row kernels shared by the differentiable ops and the streaming engine.
// Each output element is produced by the same sequence of floating-point
// operations no matter how many rows a call covers, which is what makes
// frame-by-frame inference reproduce whole-sequence inference exactly.
namespace gwa::kernels {

// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, std::size_t m, std::size_t k, const double* b, std::size_t n, double* c);

// out[m x n] = bias + a[m x k] * w[k x n]; bias may be null.
void affine(const double* a, std::size_t m, std::size_t k, const double* w, const double* bias, std::size_t n,
            double* out);

// One output frame of a causal convolution. taps[j] points at the input
// frame feeding kernel tap j (tap K-1 is the current frame) or is null when
// that frame lies before the start of the sequence. w is K x cin x cout.
void conv_row(std::span<const double* const> taps, const double* w, const double* bias, std::size_t cin,
              std::size_t cout, double* out);

// out[n x c] = adj[n x n] * x[n x c] for a single frame.
void mix_nodes(const double* adj, std::size_t n, const double* x, std::size_t c, double* out);

void relu(const double* x, std::size_t n, double* out);

// out[j] = scale[j % period] * sigmoid(x[j])
void scaled_sigmoid(const double* x, std::size_t n, const double* scale, std::size_t period, double* out);

double sigmoid(double x);

}  // namespace gwa::kernels
