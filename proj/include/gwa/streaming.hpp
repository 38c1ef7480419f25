#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gwa/network.hpp"

namespace gwa {

// Frame-by-frame evaluation of a trained model. Each temporal layer keeps a
// ring buffer of its last dilation*(K-1)+1 inputs, so memory does not grow
// with video length. Outputs match predict() on the same prefix exactly.
class StreamingModel {
 public:
  StreamingModel(const ModelParams& params, const GraphTopology& topology);

  // frame is N x 4 node features. Returns the final-stage H*C predictions
  // (horizon-major), with the horizon fallback applied.
  std::span<const double> step(std::span<const double> frame);

  void reset();
  std::size_t frames_seen() const { return frames_seen_; }
  const ModelConfig& config() const { return params_->config; }

 private:
  struct Ring {
    std::size_t capacity = 0;
    std::vector<double> rows;  // capacity x width
  };

  struct Layer {
    const Tensor* conv_w;
    const Tensor* conv_b;
    const Tensor* proj_w;
    const Tensor* proj_b;
    std::size_t dilation;
    Ring history;
  };

  struct Stage {
    const Tensor* in_w;
    const Tensor* in_b;
    const Tensor* head_w;
    const Tensor* head_b;
    std::size_t in_width;
    std::vector<Layer> layers;
  };

  const Tensor& tensor(const std::string& name) const;
  void run_head(const Tensor& w, const Tensor& b, const double* in, std::size_t width);

  const ModelParams* params_;
  Tensor normalized_;
  std::vector<const Tensor*> gc_w_, gc_b_;
  std::vector<Stage> stages_;
  std::vector<double> scale_;
  std::size_t frames_seen_ = 0;

  // scratch
  std::vector<double> gc_a_, gc_b_buf_, flat_;
  std::vector<double> h_, conv_, relu_, proj_, next_h_, z_, pred_;
  std::vector<const double*> taps_;
};

}  // namespace gwa
