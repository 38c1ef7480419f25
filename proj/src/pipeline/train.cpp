#include "gwa/pipeline/train.hpp"

#include <algorithm>
#include <random>

#include "gwa/error.hpp"
#include "gwa/pipeline/io.hpp"

namespace gwa {

PreparedVideo prepare_video(const VideoRecord& record, const TaskSpec& task, const NodeRoster& roster,
                            const std::vector<double>& horizons) {
  PreparedVideo v;
  v.record = &record;
  v.sequence = frames_to_sequence(record.detections, record.frames, roster);
  v.targets = make_targets(task_track(record, task, roster), record.frames, horizons);
  return v;
}

namespace {

struct StepOutcome {
  double loss = 0.0;
  ParameterSet grads;
};

StepOutcome loss_and_grads(const PreparedVideo& video, const ModelParams& params, const GraphTopology& topology,
                           const LossWeights& weights, LossCounters* counters) {
  Tape tape;
  ParamVars vars = bind_parameters(tape, params.tensors, true);
  std::vector<Var> preds = model_forward(tape, video.sequence, vars, params.config, topology);
  Var loss = training_loss(preds, video.targets, weights, params.config.enabled_horizons, counters);
  tape.backward(loss);
  StepOutcome out{loss.value().item(), {}};
  for (const auto& [name, v] : vars) out.grads.emplace(name, tape.grad(v));
  return out;
}

double mean_loss(const std::vector<PreparedVideo>& videos, const ModelParams& params, const GraphTopology& topology,
                 const LossWeights& weights) {
  if (videos.empty()) return 0.0;
  double total = 0.0;
  for (const PreparedVideo& v : videos) total += video_loss(v, params, topology, weights);
  return total / static_cast<double>(videos.size());
}

// Mean wMAE over classes and horizons of the final stage.
std::optional<double> validation_wmae(const std::vector<PreparedVideo>& videos, const ModelParams& params,
                                      const GraphTopology& topology) {
  if (videos.empty()) return std::nullopt;
  const ModelConfig& c = params.config;
  std::vector<std::vector<double>> pred(c.horizon_count() * c.num_classes), gt(pred.size());
  for (const PreparedVideo& v : videos) {
    const Tensor p = predict(v.sequence, params, topology).back();
    for (std::size_t hi = 0; hi < c.horizon_count(); ++hi)
      for (std::size_t k = 0; k < c.num_classes; ++k)
        for (std::size_t t = 0; t < v.sequence.frames(); ++t) {
          pred[hi * c.num_classes + k].push_back(p(t, hi, k));
          gt[hi * c.num_classes + k].push_back(v.targets.per_horizon[hi](t, k));
        }
  }
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (auto w = w_mae(pred[i], gt[i], c.horizons[i / c.num_classes])) {
      total += *w;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

void accumulate(ParameterSet& into, const ParameterSet& g) {
  if (into.empty()) {
    into = g;
    return;
  }
  for (auto& [name, t] : into) {
    const Tensor& src = g.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += src[i];
  }
}

}  // namespace

double video_loss(const PreparedVideo& video, const ModelParams& params, const GraphTopology& topology,
                  const LossWeights& weights) {
  Tape tape;
  ParamVars vars = bind_parameters(tape, params.tensors, false);
  std::vector<Var> preds = model_forward(tape, video.sequence, vars, params.config, topology);
  return training_loss(preds, video.targets, weights, params.config.enabled_horizons).value().item();
}

TrainResult train(const std::vector<VideoRecord>& records, const TaskSpec& task, const NodeRoster& roster,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (config.model.num_classes != task.num_classes()) {
    throw ConfigError("model has " + std::to_string(config.model.num_classes) + " classes, task " + task.name() +
                      " has " + std::to_string(task.num_classes()));
  }
  const GraphTopology topology = topology_for(config.model, roster);

  std::vector<PreparedVideo> train_set, val_set;
  for (const VideoRecord* r : select_videos(records, config.train_videos))
    train_set.push_back(prepare_video(*r, task, roster, config.model.horizons));
  if (train_set.empty()) throw ConfigError("no training videos");
  if (!config.val_videos.empty()) {
    for (const VideoRecord* r : select_videos(records, config.val_videos))
      val_set.push_back(prepare_video(*r, task, roster, config.model.horizons));
  }

  TrainResult result;
  result.initial = init_params(config.model, config.seed);
  ModelParams params = result.initial;
  result.best = params;
  result.initial_loss = mean_loss(train_set, params, topology, config.loss);

  AdamState adam{config.adam, 0, {}, {}};
  std::mt19937_64 order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::optional<double> best_val;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    ParameterSet batch;
    std::size_t in_batch = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const PreparedVideo& v = train_set[order[pos]];
      try {
        StepOutcome step = loss_and_grads(v, params, topology, config.loss, &result.counters);
        epoch_loss += step.loss;
        accumulate(batch, step.grads);
        ++in_batch;
        if (in_batch == config.batch_size || pos + 1 == order.size()) {
          adam_step(params.tensors, batch, adam);
          batch.clear();
          in_batch = 0;
        }
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", video " + v.record->video_id +
                           ": " + e.what());
      }
    }
    EpochStats stats{epoch, epoch_loss / static_cast<double>(order.size()), validation_wmae(val_set, params, topology)};
    if (stats.val_wmae && (!best_val || *stats.val_wmae < *best_val)) {
      best_val = stats.val_wmae;
      result.best = params;
      result.best_epoch = epoch;
    }
    result.trace.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }

  result.final_params = params;
  if (val_set.empty()) {
    result.best = params;
    result.best_epoch = config.epochs;
  }
  result.final_loss = mean_loss(train_set, params, topology, config.loss);
  return result;
}

std::string loss_trace_csv(const TrainResult& result) {
  std::string out = "epoch,train_loss,val_wmae\n";
  out += "0," + io::format_double(result.initial_loss) + ",NA\n";
  for (const EpochStats& s : result.trace) {
    out += std::to_string(s.epoch) + "," + io::format_double(s.train_loss) + "," +
           (s.val_wmae ? io::format_double(*s.val_wmae) : std::string("NA")) + "\n";
  }
  return out;
}

}  // namespace gwa
