#include "gwa/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gwa/error.hpp"

namespace gwa {

namespace {

std::string gc_name(std::size_t l, const char* what) { return "gc." + std::to_string(l) + "." + what; }

std::string stage_name(std::size_t s, const char* what) { return "tcn." + std::to_string(s) + "." + what; }

std::string layer_name(std::size_t s, std::size_t l, const char* what) {
  return "tcn." + std::to_string(s) + ".layer." + std::to_string(l) + "." + what;
}

std::string head_name(std::size_t s, const char* what) { return "head." + std::to_string(s) + "." + what; }

std::size_t stage_input_width(const ModelConfig& c, std::size_t s) {
  if (s == 0) return c.flat_width();
  return c.feed_predictions ? c.output_width() : c.tcn_channels;
}

std::size_t head_input_width(const ModelConfig& c) { return c.use_tcn ? c.tcn_channels : c.flat_width(); }

const Var& param(const ParamVars& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

std::vector<double> column_scale(const std::vector<double>& horizons, std::size_t classes) {
  std::vector<double> scale;
  scale.reserve(horizons.size() * classes);
  for (double h : horizons)
    for (std::size_t c = 0; c < classes; ++c) scale.push_back(h);
  return scale;
}

}  // namespace

void ModelConfig::validate() const {
  if (num_nodes < 2) throw ConfigError("model needs at least 2 nodes");
  if (in_channels != kNodeFeatures) throw ConfigError("node features are (cx, cy, w, h): in_channels must be 4");
  if (use_gc && (gc_layers == 0 || gc_channels == 0)) throw ConfigError("graph convolution needs layers and channels");
  if (use_tcn && (tcn_stages == 0 || tcn_layers == 0 || tcn_channels == 0)) {
    throw ConfigError("temporal stages need stages, layers and channels");
  }
  if (use_tcn && tcn_layers > 30) throw ConfigError("tcn_layers above 30 overflows the dilation schedule");
  if (kernel_size == 0) throw ConfigError("kernel_size must be >= 1");
  if (num_classes == 0) throw ConfigError("num_classes must be >= 1");
  if (horizons.empty()) throw ConfigError("at least one horizon is required");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (!(horizons[i] > 0.0) || !std::isfinite(horizons[i])) throw ConfigError("horizons must be positive");
    if (i && !(horizons[i] > horizons[i - 1])) throw ConfigError("horizons must be strictly increasing");
  }
  if (enabled_horizons.empty()) throw ConfigError("at least one horizon needs its own loss");
  for (double h : enabled_horizons) {
    if (std::find(horizons.begin(), horizons.end(), h) == horizons.end()) {
      throw ConfigError("enabled horizon " + std::to_string(h) + " is not in the horizon set");
    }
  }
  for (std::size_t h : hubs) {
    if (h >= num_nodes) throw ConfigError("hub index " + std::to_string(h) + " outside the roster");
  }
}

std::size_t ModelConfig::flat_width() const { return num_nodes * (use_gc ? gc_channels : in_channels); }

bool ModelConfig::horizon_enabled(std::size_t horizon_index) const {
  const double h = horizons.at(horizon_index);
  return std::find(enabled_horizons.begin(), enabled_horizons.end(), h) != enabled_horizons.end();
}

bool ModelConfig::all_horizons_enabled() const {
  for (std::size_t i = 0; i < horizons.size(); ++i)
    if (!horizon_enabled(i)) return false;
  return true;
}

std::size_t parameter_count(const ModelConfig& c) {
  std::size_t total = 0;
  if (c.use_gc) {
    for (std::size_t l = 0; l < c.gc_layers; ++l) {
      const std::size_t in = l == 0 ? c.in_channels : c.gc_channels;
      total += (in + 1) * c.gc_channels;
    }
  }
  if (c.use_tcn) {
    const std::size_t ch = c.tcn_channels;
    for (std::size_t s = 0; s < c.tcn_stages; ++s) {
      total += (stage_input_width(c, s) + 1) * ch;
      total += c.tcn_layers * ((c.kernel_size * ch + 1) * ch + (ch + 1) * ch);
    }
  }
  total += c.stage_count() * (head_input_width(c) + 1) * c.output_width();
  return total;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelParams params{config, {}};
  std::mt19937_64 rng(seed);
  auto make = [&](const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    params.tensors.emplace(name, std::move(t));
  };

  if (config.use_gc) {
    for (std::size_t l = 0; l < config.gc_layers; ++l) {
      const std::size_t in = l == 0 ? config.in_channels : config.gc_channels;
      make(gc_name(l, "weight"), {in, config.gc_channels}, in);
      make(gc_name(l, "bias"), {config.gc_channels}, in);
    }
  }
  if (config.use_tcn) {
    const std::size_t ch = config.tcn_channels, k = config.kernel_size;
    for (std::size_t s = 0; s < config.tcn_stages; ++s) {
      const std::size_t in = stage_input_width(config, s);
      make(stage_name(s, "in.weight"), {in, ch}, in);
      make(stage_name(s, "in.bias"), {ch}, in);
      for (std::size_t l = 0; l < config.tcn_layers; ++l) {
        make(layer_name(s, l, "conv.weight"), {k, ch, ch}, k * ch);
        make(layer_name(s, l, "conv.bias"), {ch}, k * ch);
        make(layer_name(s, l, "proj.weight"), {ch, ch}, ch);
        make(layer_name(s, l, "proj.bias"), {ch}, ch);
      }
    }
  }
  const std::size_t w = head_input_width(config);
  for (std::size_t s = 0; s < config.stage_count(); ++s) {
    make(head_name(s, "weight"), {w, config.output_width()}, w);
    make(head_name(s, "bias"), {config.output_width()}, w);
  }
  return params;
}

ParamVars bind_parameters(Tape& tape, const ParameterSet& tensors, bool trainable) {
  ParamVars vars;
  for (const auto& [name, t] : tensors) vars.emplace(name, trainable ? tape.variable(t) : tape.constant(t));
  return vars;
}

Var gc_forward(Var features, const GraphTopology& topology, Var weight, std::optional<Var> bias, bool activate) {
  const Shape& s = features.shape();
  if (s.size() != 3) throw DimensionError("gc_forward expects T x N x C features, got " + shape_string(s));
  const std::size_t frames = s[0], nodes = s[1], cin = s[2];
  if (nodes != topology.normalized.rows()) {
    throw DimensionError("gc_forward: features have " + std::to_string(nodes) + " nodes, topology has " +
                         std::to_string(topology.normalized.rows()));
  }
  Var x = ops::reshape(features, {frames * nodes, cin});
  x = ops::mix_nodes(x, topology.normalized);
  Tape& tape = *features.tape;
  const std::size_t cout = weight.shape().size() == 2 ? weight.shape()[1] : 0;
  Var b = bias ? *bias : tape.constant(Tensor(Shape{cout}));
  x = ops::linear(x, weight, b);
  if (activate) x = ops::relu(x);
  return ops::reshape(x, {frames, nodes, cout});
}

Var flatten_nodes(Var x) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw DimensionError("flatten_nodes expects rank 3, got " + shape_string(s));
  return ops::reshape(x, {s[0], s[1] * s[2]});
}

Var unflatten_nodes(Var x, std::size_t nodes) {
  const Shape& s = x.shape();
  if (s.size() != 2 || nodes == 0 || s[1] % nodes != 0) {
    throw DimensionError("unflatten_nodes: cannot split " + shape_string(s) + " into " + std::to_string(nodes) +
                         " nodes");
  }
  return ops::reshape(x, {s[0], nodes, s[1] / nodes});
}

Var tcn_stage_forward(Var x, const ParamVars& params, std::size_t stage, const ModelConfig& config) {
  if (x.shape().size() != 2 || x.shape()[0] < 1) throw DataError("temporal stage needs at least one frame");
  Var h = ops::linear(x, param(params, stage_name(stage, "in.weight")), param(params, stage_name(stage, "in.bias")));
  for (std::size_t l = 0; l < config.tcn_layers; ++l) {
    const std::size_t dilation = std::size_t{1} << l;
    Var c = ops::conv1d_causal(h, param(params, layer_name(stage, l, "conv.weight")),
                               param(params, layer_name(stage, l, "conv.bias")), dilation);
    Var r = ops::relu(c);
    Var p = ops::linear(r, param(params, layer_name(stage, l, "proj.weight")),
                        param(params, layer_name(stage, l, "proj.bias")));
    h = ops::add(h, p);
  }
  return h;
}

Var head_forward(Var features, Var weight, Var bias, const std::vector<double>& horizons, std::size_t classes) {
  Var z = ops::linear(features, weight, bias);
  if (z.shape()[1] != horizons.size() * classes) {
    throw DimensionError("head emits " + std::to_string(z.shape()[1]) + " values, expected " +
                         std::to_string(horizons.size() * classes));
  }
  return ops::scaled_sigmoid(z, column_scale(horizons, classes));
}

std::vector<Var> model_forward(Tape& tape, const GraphSequence& seq, const ParamVars& params,
                               const ModelConfig& config, const GraphTopology& topology) {
  const std::size_t frames = seq.frames();
  if (frames < 1) throw DataError("empty sequence");
  if (seq.nodes() != config.num_nodes) {
    throw DimensionError("sequence has " + std::to_string(seq.nodes()) + " nodes, model expects " +
                         std::to_string(config.num_nodes));
  }
  Var x = tape.constant(seq.features);
  if (config.use_gc) {
    for (std::size_t l = 0; l < config.gc_layers; ++l) {
      x = gc_forward(x, topology, param(params, gc_name(l, "weight")), param(params, gc_name(l, "bias")),
                     l + 1 < config.gc_layers);
    }
  }
  Var flat = flatten_nodes(x);

  std::vector<Var> preds;
  if (!config.use_tcn) {
    preds.push_back(head_forward(flat, param(params, head_name(0, "weight")), param(params, head_name(0, "bias")),
                                 config.horizons, config.num_classes));
    return preds;
  }
  Var stage_in = flat;
  for (std::size_t s = 0; s < config.tcn_stages; ++s) {
    Var feat = tcn_stage_forward(stage_in, params, s, config);
    Var pred = head_forward(feat, param(params, head_name(s, "weight")), param(params, head_name(s, "bias")),
                            config.horizons, config.num_classes);
    preds.push_back(pred);
    stage_in = config.feed_predictions ? pred : feat;
  }
  return preds;
}

std::size_t fallback_source(const ModelConfig& config, std::size_t horizon_index) {
  const std::size_t hcount = config.horizon_count();
  for (std::size_t j = horizon_index; j < hcount; ++j) {
    if (config.horizon_enabled(j)) return j;
  }
  for (std::size_t j = horizon_index; j-- > 0;) {
    if (config.horizon_enabled(j)) return j;
  }
  throw ConfigError("no horizon has its own loss");
}

void apply_horizon_fallback(Tensor& predictions, const ModelConfig& config) {
  if (config.all_horizons_enabled()) return;
  const std::size_t hcount = config.horizon_count(), classes = config.num_classes;
  const std::size_t rows = predictions.size() / (hcount * classes);
  double* p = predictions.ptr();
  for (std::size_t hi = 0; hi < hcount; ++hi) {
    if (config.horizon_enabled(hi)) continue;
    const std::size_t src = fallback_source(config, hi);
    const double h = config.horizons[hi];
    for (std::size_t t = 0; t < rows; ++t) {
      double* row = p + t * hcount * classes;
      for (std::size_t c = 0; c < classes; ++c) row[hi * classes + c] = std::min(row[src * classes + c], h);
    }
  }
}

std::vector<Tensor> predict(const GraphSequence& seq, const ModelParams& params, const GraphTopology& topology) {
  const ModelConfig& config = params.config;
  Tape tape;
  ParamVars vars = bind_parameters(tape, params.tensors, false);
  std::vector<Var> preds = model_forward(tape, seq, vars, config, topology);
  std::vector<Tensor> out;
  out.reserve(preds.size());
  for (Var p : preds) {
    Tensor t = p.value();
    apply_horizon_fallback(t, config);
    out.push_back(t.reshaped({seq.frames(), config.horizon_count(), config.num_classes}));
  }
  return out;
}

GraphTopology topology_for(const ModelConfig& config, const NodeRoster& roster) {
  if (roster.size() != config.num_nodes) {
    throw ConfigError("roster has " + std::to_string(roster.size()) + " nodes, model expects " +
                      std::to_string(config.num_nodes));
  }
  return build_topology(roster, config.topology, config.hubs);
}

}  // namespace gwa
