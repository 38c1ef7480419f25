#include "gwa/numerics/ops.hpp"

#include <cmath>
#include <string>

#include "gwa/error.hpp"
#include "gwa/numerics/kernels.hpp"

namespace gwa::ops {
namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw ContractError("operands recorded on different tapes");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                         shape_string(t.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  double* d = dst.ptr();
  const double* s = src.ptr();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank(av, 2, "matmul");
  require_rank(bv, 2, "matmul");
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()));
  }
  Tensor out(Shape{m, n});
  kernels::gemm_acc(av.ptr(), m, k, bv.ptr(), n, out.ptr());
  return a.tape->record(
      std::move(out), {a.id, b.id},
      [a, b, m, k, n](Tape& tape, const Tensor& g) {
        if (tape.requires_grad(a)) {
          const Tensor bt = b.value().transposed();
          kernels::gemm_acc(g.ptr(), m, n, bt.ptr(), k, tape.grad_buffer(a.id).ptr());
        }
        if (tape.requires_grad(b)) {
          const Tensor at = a.value().transposed();
          kernels::gemm_acc(at.ptr(), k, m, g.ptr(), n, tape.grad_buffer(b.id).ptr());
        }
      },
      "matmul");
}

Var linear(Var x, Var w, Var bias) {
  require_same_tape(x, w);
  require_same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = bias.value();
  require_rank(xv, 2, "linear");
  require_rank(wv, 2, "linear");
  require_rank(bv, 1, "linear");
  const std::size_t m = xv.rows(), k = xv.cols(), n = wv.cols();
  if (wv.rows() != k || bv.size() != n) {
    throw DimensionError("linear: incompatible shapes " + shape_string(xv.shape()) + ", " +
                         shape_string(wv.shape()) + ", " + shape_string(bv.shape()));
  }
  Tensor out(Shape{m, n});
  kernels::affine(xv.ptr(), m, k, wv.ptr(), bv.ptr(), n, out.ptr());
  return x.tape->record(
      std::move(out), {x.id, w.id, bias.id},
      [x, w, bias, m, k, n](Tape& tape, const Tensor& g) {
        if (tape.requires_grad(x)) {
          const Tensor wt = w.value().transposed();
          kernels::gemm_acc(g.ptr(), m, n, wt.ptr(), k, tape.grad_buffer(x.id).ptr());
        }
        if (tape.requires_grad(w)) {
          const Tensor xt = x.value().transposed();
          kernels::gemm_acc(xt.ptr(), k, m, g.ptr(), n, tape.grad_buffer(w.id).ptr());
        }
        if (tape.requires_grad(bias)) {
          double* db = tape.grad_buffer(bias.id).ptr();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) db[j] += g(i, j);
        }
      },
      "linear");
}

Var conv1d_causal(Var x, Var w, Var bias, std::size_t dilation) {
  require_same_tape(x, w);
  require_same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const Tensor& bv = bias.value();
  require_rank(xv, 2, "conv1d_causal");
  require_rank(wv, 3, "conv1d_causal");
  require_rank(bv, 1, "conv1d_causal");
  const std::size_t steps = xv.rows(), cin = xv.cols();
  const std::size_t taps = wv.dim(0), cout = wv.dim(2);
  if (steps == 0) throw DataError("conv1d_causal: empty sequence");
  if (taps == 0) throw ConfigError("conv1d_causal: kernel size must be >= 1");
  if (dilation == 0) throw ConfigError("conv1d_causal: dilation must be >= 1");
  if (wv.dim(1) != cin || bv.size() != cout) {
    throw DimensionError("conv1d_causal: incompatible shapes " + shape_string(xv.shape()) + ", " +
                         shape_string(wv.shape()) + ", " + shape_string(bv.shape()));
  }
  Tensor out(Shape{steps, cout});
  std::vector<const double*> rows(taps);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < taps; ++j) {
      const std::size_t shift = dilation * (taps - 1 - j);
      rows[j] = t >= shift ? xv.row(t - shift) : nullptr;
    }
    kernels::conv_row(rows, wv.ptr(), bv.ptr(), cin, cout, out.row(t));
  }
  return x.tape->record(
      std::move(out), {x.id, w.id, bias.id},
      [x, w, bias, steps, cin, cout, taps, dilation](Tape& tape, const Tensor& g) {
        const Tensor& xv = x.value();
        const Tensor& wv = w.value();
        for (std::size_t j = 0; j < taps; ++j) {
          const std::size_t shift = dilation * (taps - 1 - j);
          if (shift >= steps) continue;
          const std::size_t valid = steps - shift;
          if (tape.requires_grad(x)) {
            // dx[t - shift] += dy[t] * w_j^T
            Tensor wt(Shape{cout, cin});
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t co = 0; co < cout; ++co) wt(co, ci) = wv(j, ci, co);
            Tensor& dx = tape.grad_buffer(x.id);
            kernels::gemm_acc(g.row(shift), valid, cout, wt.ptr(), cin, dx.ptr());
          }
          if (tape.requires_grad(w)) {
            // dw_j[ci][:] += x[t - shift][ci] * dy[t][:]
            double* dw = tape.grad_buffer(w.id).ptr() + j * cin * cout;
            for (std::size_t t = shift; t < steps; ++t) {
              const double* xr = xv.row(t - shift);
              const double* gr = g.row(t);
              for (std::size_t ci = 0; ci < cin; ++ci) {
                const double s = xr[ci];
                double* dwr = dw + ci * cout;
                for (std::size_t co = 0; co < cout; ++co) dwr[co] += s * gr[co];
              }
            }
          }
        }
        if (tape.requires_grad(bias)) {
          double* db = tape.grad_buffer(bias.id).ptr();
          for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t co = 0; co < cout; ++co) db[co] += g(t, co);
        }
      },
      "conv1d_causal");
}

Var relu(Var x) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  kernels::relu(xv.ptr(), xv.size(), out.ptr());
  return x.tape->record(
      std::move(out), {x.id},
      [x](Tape& tape, const Tensor& g) {
        const Tensor& xv = x.value();
        double* dx = tape.grad_buffer(x.id).ptr();
        for (std::size_t i = 0; i < xv.size(); ++i)
          if (xv[i] > 0.0) dx[i] += g[i];
      },
      "relu");
}

Var scaled_sigmoid(Var x, std::vector<double> column_scale) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "scaled_sigmoid");
  if (column_scale.size() != xv.cols()) {
    throw DimensionError("scaled_sigmoid: " + std::to_string(column_scale.size()) + " scales for " +
                         std::to_string(xv.cols()) + " columns");
  }
  Tensor out(xv.shape());
  kernels::scaled_sigmoid(xv.ptr(), xv.size(), column_scale.data(), column_scale.size(), out.ptr());
  return x.tape->record(
      std::move(out), {x.id},
      [x, scale = std::move(column_scale)](Tape& tape, const Tensor& g) {
        const Tensor& xv = x.value();
        double* dx = tape.grad_buffer(x.id).ptr();
        for (std::size_t i = 0; i < xv.size(); ++i) {
          const double s = kernels::sigmoid(xv[i]);
          dx[i] += g[i] * scale[i % scale.size()] * s * (1.0 - s);
        }
      },
      "scaled_sigmoid");
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) {
    throw DimensionError("add: shape mismatch " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
  }
  Tensor out = av;
  add_into(out, bv);
  return a.tape->record(
      std::move(out), {a.id, b.id},
      [a, b](Tape& tape, const Tensor& g) {
        if (tape.requires_grad(a)) add_into(tape.grad_buffer(a.id), g);
        if (tape.requires_grad(b)) add_into(tape.grad_buffer(b.id), g);
      },
      "add");
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i];
  return x.tape->record(
      Tensor::scalar(total), {x.id},
      [x](Tape& tape, const Tensor& g) {
        Tensor& dx = tape.grad_buffer(x.id);
        const double s = g[0];
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += s;
      },
      "sum");
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return x.tape->record(
      std::move(out), {x.id},
      [x, factor](Tape& tape, const Tensor& g) {
        Tensor& dx = tape.grad_buffer(x.id);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += factor * g[i];
      },
      "scale");
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape->record(
      std::move(out), {x.id},
      [x](Tape& tape, const Tensor& g) {
        Tensor& dx = tape.grad_buffer(x.id);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
      },
      "reshape");
}

Var mix_nodes(Var x, const Tensor& adj) {
  const Tensor& xv = x.value();
  require_rank(xv, 2, "mix_nodes");
  require_rank(adj, 2, "mix_nodes");
  const std::size_t n = adj.rows();
  if (adj.cols() != n || n == 0 || xv.rows() % n != 0) {
    throw DimensionError("mix_nodes: " + shape_string(xv.shape()) + " rows are not frames of " +
                         std::to_string(n) + " nodes");
  }
  const std::size_t frames = xv.rows() / n, c = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t t = 0; t < frames; ++t) kernels::mix_nodes(adj.ptr(), n, xv.row(t * n), c, out.row(t * n));
  return x.tape->record(
      std::move(out), {x.id},
      [x, adj_t = adj.transposed(), n, frames, c](Tape& tape, const Tensor& g) {
        Tensor& dx = tape.grad_buffer(x.id);
        for (std::size_t t = 0; t < frames; ++t)
          kernels::gemm_acc(adj_t.ptr(), n, n, g.row(t * n), c, dx.row(t * n));
      },
      "mix_nodes");
}

Var weighted_abs_error(Var pred, const Tensor& target, const Tensor& weights) {
  const Tensor& pv = pred.value();
  if (pv.shape() != target.shape() || pv.shape() != weights.shape()) {
    throw DimensionError("weighted_abs_error: shapes " + shape_string(pv.shape()) + ", " +
                         shape_string(target.shape()) + ", " + shape_string(weights.shape()));
  }
  require_finite(target, "weighted_abs_error target");
  require_finite(weights, "weighted_abs_error weights");
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (weights[i] != 0.0) total += weights[i] * std::abs(pv[i] - target[i]);
  }
  return pred.tape->record(
      Tensor::scalar(total), {pred.id},
      [pred, target, weights](Tape& tape, const Tensor& g) {
        const Tensor& pv = pred.value();
        Tensor& dp = tape.grad_buffer(pred.id);
        const double s = g[0];
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const double diff = pv[i] - target[i];
          if (weights[i] == 0.0 || diff == 0.0) continue;
          dp[i] += s * weights[i] * (diff > 0.0 ? 1.0 : -1.0);
        }
      },
      "weighted_abs_error");
}

}  // namespace gwa::ops
