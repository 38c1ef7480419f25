#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "gwa/pipeline/config.hpp"
#include "gwa/pipeline/dataset.hpp"

namespace gwa {

// Graph sequence and targets of one video, computed once per run.
struct PreparedVideo {
  const VideoRecord* record = nullptr;
  GraphSequence sequence;
  AnticipationTarget targets;
};

PreparedVideo prepare_video(const VideoRecord& record, const TaskSpec& task, const NodeRoster& roster,
                            const std::vector<double>& horizons);

struct EpochStats {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // mean over the epoch's videos, measured before each update
  std::optional<double> val_wmae;
};

struct TrainResult {
  ModelParams initial;
  ModelParams final_params;
  ModelParams best;            // lowest validation wMAE; final_params without a validation split
  std::size_t best_epoch = 0;  // 0 when best == initial
  std::vector<EpochStats> trace;
  double initial_loss = 0.0;   // mean training loss of `initial`
  double final_loss = 0.0;     // mean training loss of `final_params`
  LossCounters counters;       // accumulated over every training step
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Loss of one video for the given parameters, summed over stages.
double video_loss(const PreparedVideo& video, const ModelParams& params, const GraphTopology& topology,
                  const LossWeights& weights);

TrainResult train(const std::vector<VideoRecord>& records, const TaskSpec& task, const NodeRoster& roster,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

std::string loss_trace_csv(const TrainResult& result);

}  // namespace gwa
