#include "gwa/streaming.hpp"

#include <algorithm>

#include "gwa/error.hpp"
#include "gwa/numerics/kernels.hpp"

namespace gwa {

StreamingModel::StreamingModel(const ModelParams& params, const GraphTopology& topology)
    : params_(&params), normalized_(topology.normalized) {
  const ModelConfig& c = params.config;
  c.validate();
  if (normalized_.rows() != c.num_nodes) throw DimensionError("topology does not match the model's node count");
  if (c.use_gc) {
    for (std::size_t l = 0; l < c.gc_layers; ++l) {
      gc_w_.push_back(&tensor("gc." + std::to_string(l) + ".weight"));
      gc_b_.push_back(&tensor("gc." + std::to_string(l) + ".bias"));
    }
  }
  const std::size_t stages = c.stage_count();
  for (std::size_t s = 0; s < stages; ++s) {
    Stage st{};
    const std::string prefix = "tcn." + std::to_string(s) + ".";
    st.head_w = &tensor("head." + std::to_string(s) + ".weight");
    st.head_b = &tensor("head." + std::to_string(s) + ".bias");
    if (c.use_tcn) {
      st.in_w = &tensor(prefix + "in.weight");
      st.in_b = &tensor(prefix + "in.bias");
      st.in_width = st.in_w->rows();
      for (std::size_t l = 0; l < c.tcn_layers; ++l) {
        const std::string lp = prefix + "layer." + std::to_string(l) + ".";
        Layer layer{&tensor(lp + "conv.weight"), &tensor(lp + "conv.bias"), &tensor(lp + "proj.weight"),
                    &tensor(lp + "proj.bias"), std::size_t{1} << l, {}};
        layer.history.capacity = layer.dilation * (c.kernel_size - 1) + 1;
        layer.history.rows.assign(layer.history.capacity * c.tcn_channels, 0.0);
        st.layers.push_back(std::move(layer));
      }
    }
    stages_.push_back(std::move(st));
  }
  for (double h : c.horizons)
    for (std::size_t k = 0; k < c.num_classes; ++k) scale_.push_back(h);

  const std::size_t widest = std::max({c.in_channels, c.gc_channels, std::size_t{1}});
  gc_a_.resize(c.num_nodes * widest);
  gc_b_buf_.resize(c.num_nodes * widest);
  flat_.resize(c.flat_width());
  h_.resize(c.tcn_channels);
  conv_.resize(c.tcn_channels);
  relu_.resize(c.tcn_channels);
  proj_.resize(c.tcn_channels);
  next_h_.resize(c.tcn_channels);
  z_.resize(c.output_width());
  pred_.resize(c.output_width());
  taps_.resize(c.kernel_size);
}

const Tensor& StreamingModel::tensor(const std::string& name) const {
  auto it = params_->tensors.find(name);
  if (it == params_->tensors.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

void StreamingModel::reset() {
  frames_seen_ = 0;
  for (Stage& st : stages_)
    for (Layer& l : st.layers) std::fill(l.history.rows.begin(), l.history.rows.end(), 0.0);
}

void StreamingModel::run_head(const Tensor& w, const Tensor& b, const double* in, std::size_t width) {
  kernels::affine(in, 1, width, w.ptr(), b.ptr(), z_.size(), z_.data());
  kernels::scaled_sigmoid(z_.data(), z_.size(), scale_.data(), scale_.size(), pred_.data());
}

std::span<const double> StreamingModel::step(std::span<const double> frame) {
  const ModelConfig& c = params_->config;
  const std::size_t n = c.num_nodes;
  if (frame.size() != n * c.in_channels) {
    throw DimensionError("streaming frame has " + std::to_string(frame.size()) + " values, expected " +
                         std::to_string(n * c.in_channels));
  }
  require_finite(Tensor(Shape{frame.size()}, std::vector<double>(frame.begin(), frame.end())), "streaming frame");

  // Graph convolution for this frame.
  const double* x = frame.data();
  std::size_t width = c.in_channels;
  if (c.use_gc) {
    for (std::size_t l = 0; l < gc_w_.size(); ++l) {
      const std::size_t cout = gc_w_[l]->cols();
      kernels::mix_nodes(normalized_.ptr(), n, x, width, gc_a_.data());
      kernels::affine(gc_a_.data(), n, width, gc_w_[l]->ptr(), gc_b_[l]->ptr(), cout, gc_b_buf_.data());
      if (l + 1 < gc_w_.size()) kernels::relu(gc_b_buf_.data(), n * cout, gc_b_buf_.data());
      std::copy(gc_b_buf_.begin(), gc_b_buf_.begin() + static_cast<long>(n * cout), flat_.begin());
      x = flat_.data();
      width = cout;
    }
  } else {
    std::copy(frame.begin(), frame.end(), flat_.begin());
  }
  const std::size_t flat_width = n * width;

  if (!c.use_tcn) {
    run_head(*stages_[0].head_w, *stages_[0].head_b, flat_.data(), flat_width);
  } else {
    const std::size_t ch = c.tcn_channels, k = c.kernel_size;
    const std::size_t t = frames_seen_;
    std::vector<double> stage_in(flat_.begin(), flat_.begin() + static_cast<long>(flat_width));
    for (Stage& st : stages_) {
      kernels::affine(stage_in.data(), 1, st.in_width, st.in_w->ptr(), st.in_b->ptr(), ch, h_.data());
      for (Layer& layer : st.layers) {
        Ring& ring = layer.history;
        double* slot = ring.rows.data() + (t % ring.capacity) * ch;
        std::copy(h_.begin(), h_.end(), slot);
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t shift = layer.dilation * (k - 1 - j);
          taps_[j] = t >= shift ? ring.rows.data() + ((t - shift) % ring.capacity) * ch : nullptr;
        }
        kernels::conv_row(taps_, layer.conv_w->ptr(), layer.conv_b->ptr(), ch, ch, conv_.data());
        kernels::relu(conv_.data(), ch, relu_.data());
        kernels::affine(relu_.data(), 1, ch, layer.proj_w->ptr(), layer.proj_b->ptr(), ch, proj_.data());
        for (std::size_t i = 0; i < ch; ++i) h_[i] = h_[i] + proj_[i];
      }
      run_head(*st.head_w, *st.head_b, h_.data(), ch);
      if (c.feed_predictions) {
        stage_in.assign(pred_.begin(), pred_.end());
      } else {
        stage_in.assign(h_.begin(), h_.end());
      }
    }
  }
  ++frames_seen_;

  Tensor row(Shape{1, pred_.size()}, pred_);
  apply_horizon_fallback(row, c);
  std::copy(row.data().begin(), row.data().end(), pred_.begin());
  return pred_;
}

}  // namespace gwa
