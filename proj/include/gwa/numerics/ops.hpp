#pragma once

#include <cstddef>
#include <vector>

#include "gwa/numerics/tape.hpp"

// Differentiable primitives. Every op validates shapes (DimensionError),
// rejects non-finite results (NumericError) and registers an adjoint on the
// tape when any input requires a gradient.
namespace gwa::ops {

// a[m x k] * b[k x n]
Var matmul(Var a, Var b);

// x[m x k] * w[k x n] + bias[n]
Var linear(Var x, Var w, Var bias);

// Causal dilated convolution over time. x is T x cin, w is K x cin x cout,
// bias is cout. Output row t reads input rows t - dilation*(K-1-j) for each
// tap j, with rows before the start of the sequence taken as zero.
Var conv1d_causal(Var x, Var w, Var bias, std::size_t dilation);

Var relu(Var x);

// y = scale[col] * sigmoid(x) for a matrix x; scale has one entry per column.
Var scaled_sigmoid(Var x, std::vector<double> column_scale);

Var add(Var a, Var b);
Var sum(Var x);
Var scale(Var x, double factor);
Var reshape(Var x, Shape shape);

// Per-frame graph mixing. x holds T*N rows of node features (frame-major);
// each frame's N rows are replaced by adj * rows. adj is a constant N x N.
Var mix_nodes(Var x, const Tensor& adj);

// sum_i weights[i] * |pred[i] - target[i]|; target and weights are constants.
// The subgradient at pred == target is taken as zero.
Var weighted_abs_error(Var pred, const Tensor& target, const Tensor& weights);

}  // namespace gwa::ops
