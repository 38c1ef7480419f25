#pragma once

#include <string>
#include <vector>

#include "gwa/anticipation.hpp"
#include "gwa/pipeline/dataset.hpp"
#include "gwa/streaming.hpp"

namespace gwa {

struct EvalOptions {
  std::size_t jobs = 1;
  // Online mode: frame-by-frame through StreamingModel. Otherwise the whole
  // video is run at once (identical outputs, no per-frame latency).
  bool streaming = true;
};

struct VideoPredictions {
  std::string video_id;
  Tensor predictions;  // final stage, T x H x C
  AnticipationTarget targets;
  double latency_seconds = 0.0;  // total over the video's frames
};

// Detections bucketed per frame (index 0 = frame 1).
std::vector<std::vector<Detection>> detections_by_frame(const VideoRecord& record);

// Online inference over every video. Per-frame time covers graph assembly and
// the forward pass; results keep the input order whatever the job count.
std::vector<VideoPredictions> run_predictions(const std::vector<const VideoRecord*>& records,
                                              const ModelParams& params, const TaskSpec& task,
                                              const NodeRoster& roster, const EvalOptions& options);

MetricReport evaluate(const std::vector<const VideoRecord*>& records, const ModelParams& params,
                      const TaskSpec& task, const NodeRoster& roster, const EvalOptions& options = {});

MetricReport report_from_predictions(const std::vector<VideoPredictions>& videos, const ModelConfig& config,
                                     const TaskSpec& task);

// video_id,frame,class,horizon,gt,pred
std::string plot_data_csv(const std::vector<VideoPredictions>& videos, const ModelConfig& config,
                          const TaskSpec& task);

}  // namespace gwa
