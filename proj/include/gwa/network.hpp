#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gwa/graph.hpp"
#include "gwa/numerics/adam.hpp"
#include "gwa/numerics/ops.hpp"

namespace gwa {

struct ModelConfig {
  std::size_t num_nodes = 8;
  std::size_t in_channels = kNodeFeatures;
  std::size_t gc_layers = 2;
  std::size_t gc_channels = 64;
  std::size_t tcn_stages = 2;
  std::size_t tcn_layers = 14;  // layer l uses dilation 2^l
  std::size_t tcn_channels = 64;
  std::size_t kernel_size = 3;
  std::vector<double> horizons{2.0, 3.0, 5.0};  // minutes, strictly increasing
  std::size_t num_classes = 5;
  TopologyMode topology = TopologyMode::kPriorKnowledge;
  std::vector<std::size_t> hubs = default_hubs();

  bool use_gc = true;
  bool use_tcn = true;
  // Horizons trained with their own loss terms (at least one). A horizon
  // outside this set reports min(p, h), p being the prediction of the
  // smallest enabled horizon above it, or of the largest enabled one.
  std::vector<double> enabled_horizons{2.0, 3.0, 5.0};
  // Stage s > 0 consumes stage s-1 predictions instead of its features.
  bool feed_predictions = false;

  void validate() const;
  std::size_t horizon_count() const { return horizons.size(); }
  std::size_t output_width() const { return horizons.size() * num_classes; }
  // Width of the flattened per-frame vector entering the temporal stages.
  std::size_t flat_width() const;
  std::size_t stage_count() const { return use_tcn ? tcn_stages : 1; }
  bool horizon_enabled(std::size_t horizon_index) const;
  bool all_horizons_enabled() const;

  bool operator==(const ModelConfig&) const = default;
};

// Number of scalars ModelParams holds for `config`:
//   GC layers:   sum_l (in_l + 1) * gc_channels, in_0 = 4, in_l = gc_channels
//   each stage:  (in_s + 1) * ch + layers * ((K * ch + 1) * ch + (ch + 1) * ch)
//                in_0 = flat_width, in_s = ch (or H*C when feeding predictions)
//   each head:   (w + 1) * H * C, w = ch (or flat_width without TCN)
std::size_t parameter_count(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  ParameterSet tensors;

  std::size_t scalar_count() const;
  bool operator==(const ModelParams&) const = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, reproducible
// from the seed.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

using ParamVars = std::map<std::string, Var>;

// Puts every tensor on the tape, as trainable variables or constants.
ParamVars bind_parameters(Tape& tape, const ParameterSet& tensors, bool trainable);

// Per-frame graph convolution: out[t] = A_hat * in[t] * W (+ bias), followed
// by ReLU when `activate`. features is T x N x Cin.
Var gc_forward(Var features, const GraphTopology& topology, Var weight, std::optional<Var> bias, bool activate);

// T x N x C -> T x (N*C), row-major per frame.
Var flatten_nodes(Var x);
Var unflatten_nodes(Var x, std::size_t nodes);

// One MSTCN stage: 1x1 input projection, then residual layers
// h <- h + proj(relu(causal_conv(h, dilation 2^l))).
Var tcn_stage_forward(Var x, const ParamVars& params, std::size_t stage, const ModelConfig& config);

// Affine map to T x (H*C) then h * sigmoid per horizon block.
// Column index is horizon_index * C + class.
Var head_forward(Var features, Var weight, Var bias, const std::vector<double>& horizons, std::size_t classes);

// Whole network on the tape. Returns one T x (H*C) prediction per stage
// (a single one when the temporal stages are disabled).
std::vector<Var> model_forward(Tape& tape, const GraphSequence& seq, const ParamVars& params,
                               const ModelConfig& config, const GraphTopology& topology);

// Index of the enabled horizon a disabled one copies from.
std::size_t fallback_source(const ModelConfig& config, std::size_t horizon_index);

// Rewrites slices of horizons without their own loss from their fallback
// source, in place on a T x (H*C) matrix.
void apply_horizon_fallback(Tensor& predictions, const ModelConfig& config);

// Inference without gradients. Each entry is T x H x C, fallback applied.
std::vector<Tensor> predict(const GraphSequence& seq, const ModelParams& params, const GraphTopology& topology);

GraphTopology topology_for(const ModelConfig& config, const NodeRoster& roster);

}  // namespace gwa
