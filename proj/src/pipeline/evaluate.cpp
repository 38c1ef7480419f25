#include "gwa/pipeline/evaluate.hpp"

#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "gwa/error.hpp"
#include "gwa/pipeline/io.hpp"

namespace gwa {

std::vector<std::vector<Detection>> detections_by_frame(const VideoRecord& record) {
  std::vector<std::vector<Detection>> out(record.frames);
  for (const Detection& d : record.detections) {
    if (d.frame < 1 || static_cast<std::size_t>(d.frame) > record.frames) {
      throw DataError("detection frame " + std::to_string(d.frame) + " outside video " + record.video_id);
    }
    out[static_cast<std::size_t>(d.frame - 1)].push_back(d);
  }
  return out;
}

namespace {

VideoPredictions predict_video(const VideoRecord& record, const ModelParams& params, const GraphTopology& topology,
                               const TaskSpec& task, const NodeRoster& roster, bool streaming) {
  const ModelConfig& c = params.config;
  VideoPredictions out;
  out.video_id = record.video_id;
  out.targets = make_targets(task_track(record, task, roster), record.frames, c.horizons);
  if (!streaming) {
    out.predictions = predict(frames_to_sequence(record.detections, record.frames, roster), params, topology).back();
    return out;
  }
  const auto frames = detections_by_frame(record);
  StreamingModel model(params, topology);
  out.predictions = Tensor(Shape{record.frames, c.horizon_count(), c.num_classes});
  std::vector<double> features(c.num_nodes * kNodeFeatures);
  using clock = std::chrono::steady_clock;
  for (std::size_t t = 0; t < record.frames; ++t) {
    const auto start = clock::now();
    frame_features(frames[t], roster, features.data());
    const auto row = model.step(features);
    out.latency_seconds += std::chrono::duration<double>(clock::now() - start).count();
    std::copy(row.begin(), row.end(), out.predictions.ptr() + t * row.size());
  }
  return out;
}

}  // namespace

std::vector<VideoPredictions> run_predictions(const std::vector<const VideoRecord*>& records,
                                              const ModelParams& params, const TaskSpec& task,
                                              const NodeRoster& roster, const EvalOptions& options) {
  if (params.config.num_classes != task.num_classes()) {
    throw ConfigError("checkpoint predicts " + std::to_string(params.config.num_classes) + " classes, task " +
                      task.name() + " has " + std::to_string(task.num_classes()));
  }
  const GraphTopology topology = topology_for(params.config, roster);
  std::vector<VideoPredictions> out(records.size());
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, records.size()));
  if (jobs == 1) {
    for (std::size_t i = 0; i < records.size(); ++i)
      out[i] = predict_video(*records[i], params, topology, task, roster, options.streaming);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < records.size(); i = next++)
          out[i] = predict_video(*records[i], params, topology, task, roster, options.streaming);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

MetricReport report_from_predictions(const std::vector<VideoPredictions>& videos, const ModelConfig& config,
                                     const TaskSpec& task) {
  std::vector<std::vector<Tensor>> preds;
  std::vector<AnticipationTarget> targets;
  double latency = 0.0;
  std::size_t frames = 0;
  for (const VideoPredictions& v : videos) {
    const std::size_t steps = v.predictions.dim(0);
    std::vector<Tensor> per_h;
    for (std::size_t hi = 0; hi < config.horizon_count(); ++hi) {
      Tensor m(Shape{steps, config.num_classes});
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t k = 0; k < config.num_classes; ++k) m(t, k) = v.predictions(t, hi, k);
      per_h.push_back(std::move(m));
    }
    preds.push_back(std::move(per_h));
    targets.push_back(v.targets);
    latency += v.latency_seconds;
    frames += steps;
  }
  MetricReport report = compute_report(task.name(), task.classes, config.horizons, preds, targets);
  report.latency_frames = frames;
  report.mean_latency_seconds = frames ? latency / static_cast<double>(frames) : 0.0;
  return report;
}

MetricReport evaluate(const std::vector<const VideoRecord*>& records, const ModelParams& params, const TaskSpec& task,
                      const NodeRoster& roster, const EvalOptions& options) {
  return report_from_predictions(run_predictions(records, params, task, roster, options), params.config, task);
}

std::string plot_data_csv(const std::vector<VideoPredictions>& videos, const ModelConfig& config,
                          const TaskSpec& task) {
  std::ostringstream os;
  os << "video_id,frame,class,horizon,gt,pred\n";
  for (const VideoPredictions& v : videos) {
    for (std::size_t k = 0; k < config.num_classes; ++k)
      for (std::size_t hi = 0; hi < config.horizon_count(); ++hi)
        for (std::size_t t = 0; t < v.predictions.dim(0); ++t)
          os << v.video_id << ',' << t + 1 << ',' << task.classes[k] << ',' << io::format_double(config.horizons[hi])
             << ',' << io::format_double(v.targets.per_horizon[hi](t, k)) << ','
             << io::format_double(v.predictions(t, hi, k)) << '\n';
  }
  return os.str();
}

}  // namespace gwa
