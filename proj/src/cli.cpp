#include "gwa/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "gwa/error.hpp"
#include "gwa/pipeline/ablation.hpp"
#include "gwa/pipeline/checkpoint.hpp"
#include "gwa/pipeline/evaluate.hpp"
#include "gwa/pipeline/io.hpp"
#include "gwa/pipeline/synthetic.hpp"
#include "gwa/pipeline/train.hpp"
#include "gwa/streaming.hpp"

namespace gwa::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--seed", c.seed, "shorthand for --set seed=N (synth: synth.seed=N)");
}

RunConfig resolve_config(const Common& c, const NodeRoster& roster, std::ostream& err, bool seed_is_synth = false) {
  RunConfig config = RunConfig::defaults(roster);
  if (!c.config_path.empty()) apply_text(config, io::read_file(c.config_path), c.config_path, roster);
  for (const std::string& o : c.overrides) apply_override(config, o, roster);
  if (c.seed) apply_setting(config, seed_is_synth ? "synth.seed" : "seed", std::to_string(*c.seed), roster);
  resolve(config, roster);
  err << "# resolved config\n" << dump_config(config, roster);
  return config;
}

struct DataPaths {
  std::string detections;
  std::string annotations;
};

void add_data(CLI::App* cmd, DataPaths& d) {
  cmd->add_option("--detections", d.detections, "detections CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--annotations", d.annotations, "annotations CSV")->required()->check(CLI::ExistingFile);
}

void write_or_print(const std::string& path, const std::string& content, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << content;
  } else {
    io::write_file_atomic(path, content);
  }
}

std::string prediction_header(const ModelConfig& c, const TaskSpec& task) {
  std::string h = "video_id,frame";
  for (double hz : c.horizons)
    for (const std::string& name : task.classes) h += "," + name + "@" + io::format_double(hz);
  return h + ",latency_s";
}

// Reads detection lines, emitting one prediction line per frame as soon as
// a later frame (or another video, or end of input) shows it is complete.
void stream_predictions(std::istream& in, std::ostream& out, const ModelParams& params, const TaskSpec& task,
                        const NodeRoster& roster, bool flush_each) {
  const GraphTopology topology = topology_for(params.config, roster);
  StreamingModel model(params, topology);
  std::vector<double> features(params.config.num_nodes * kNodeFeatures);
  std::string video;
  int frame = 0;  // frame currently collecting detections
  std::vector<Detection> pending;

  auto emit_frame = [&](int f, const std::vector<Detection>& dets) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    frame_features(dets, roster, features.data());
    const auto row = model.step(features);
    const double latency = std::chrono::duration<double>(clock::now() - start).count();
    out << video << ',' << f;
    for (double v : row) out << ',' << io::format_double(v);
    out << ',' << io::format_double(latency) << '\n';
    if (flush_each) out.flush();
  };
  // Emits frames up to (excluding) `until`, filling gaps with empty frames.
  auto flush_until = [&](int until) {
    while (frame < until) {
      if (frame >= 1) emit_frame(frame, pending);
      pending.clear();
      ++frame;
    }
  };

  out << prediction_header(params.config, task) << '\n';
  if (flush_each) out.flush();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    if (io::trim(line).rfind("video_id", 0) == 0) continue;
    std::string id;
    const Detection d = parse_detection_line(line, "stdin", line_no, &id);
    if (d.frame < 1) throw ParseError("stdin", line_no, "frames start at 1");
    if (id != video) {
      if (!video.empty()) flush_until(frame + 1);
      video = id;
      model.reset();
      frame = 1;
      pending.clear();
    }
    if (d.frame < frame) throw ParseError("stdin", line_no, "frames must not go backwards within a video");
    flush_until(d.frame);
    try {
      validate_detection(d, roster);
    } catch (const DataError& e) {
      throw ParseError("stdin", line_no, e.what());
    }
    pending.push_back(d);
  }
  if (!video.empty()) flush_until(frame + 1);
}

std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> cholec80_files(const std::string& phase_dir,
                                                                                   const std::string& tool_dir) {
  std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> out;
  const std::string suffix = "-phase.txt";
  for (const auto& entry : fs::directory_iterator(phase_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
    const std::string id = name.substr(0, name.size() - suffix.size());
    const fs::path tool = fs::path(tool_dir) / (id + "-tool.txt");
    if (!fs::exists(tool)) throw DataError("no tool annotations for " + id + " in " + tool_dir);
    out.push_back({id, {entry.path(), tool}});
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no *-phase.txt files in " + phase_dir);
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  const NodeRoster roster = NodeRoster::cholec80();
  CLI::App app{"Surgical workflow anticipation from instrument graphs", "gwa"};
  app.footer("\n" + config_help(roster));
  app.require_subcommand(1);

  Common synth_c, train_c, eval_c, infer_c, ablate_c, plot_c;
  DataPaths train_d, eval_d, ablate_d, plot_d;

  auto* synth = app.add_subcommand("synth", "generate a synthetic annotated dataset");
  add_common(synth, synth_c);
  std::string synth_dir;
  synth->add_option("--out-dir", synth_dir, "directory for detections.csv and annotations.csv")->required();

  auto* import = app.add_subcommand("import-cholec80", "convert Cholec80 phase/tool annotations");
  std::string phase_dir, tool_dir, import_out, import_det_out;
  import->add_option("--phase-dir", phase_dir, "directory of videoNN-phase.txt")->required()->check(CLI::ExistingDirectory);
  import->add_option("--tool-dir", tool_dir, "directory of videoNN-tool.txt")->required()->check(CLI::ExistingDirectory);
  import->add_option("--out", import_out, "annotations CSV to write")->required();
  import->add_option("--detections-out", import_det_out, "also write an empty detections CSV");

  auto* train_cmd = app.add_subcommand("train", "train a model and write its checkpoint");
  add_common(train_cmd, train_c);
  add_data(train_cmd, train_d);
  std::string train_out, trace_out;
  train_cmd->add_option("--out", train_out, "checkpoint file")->required();
  train_cmd->add_option("--trace", trace_out, "per-epoch loss trace CSV");

  auto* eval_cmd = app.add_subcommand("evaluate", "online evaluation of a checkpoint");
  add_common(eval_cmd, eval_c);
  add_data(eval_cmd, eval_d);
  std::string eval_ckpt, eval_out;
  std::optional<std::size_t> eval_jobs;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "metric report CSV (default: stdout)");
  eval_cmd->add_option("--jobs", eval_jobs, "videos evaluated in parallel");

  auto* infer = app.add_subcommand("infer", "per-frame predictions from detections");
  add_common(infer, infer_c);
  std::string infer_ckpt, infer_det, infer_out;
  bool infer_stream = false;
  infer->add_option("--checkpoint", infer_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  auto* stream_flag = infer->add_flag("--stream", infer_stream, "read detection lines from standard input");
  infer->add_option("--detections", infer_det, "detections CSV")->check(CLI::ExistingFile)->excludes(stream_flag);
  infer->add_option("--out", infer_out, "predictions CSV (default: stdout)");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate the component ablation grid");
  add_common(ablate, ablate_c);
  add_data(ablate, ablate_d);
  std::string ablate_out;
  ablate->add_option("--out", ablate_out, "grid CSV")->required();

  auto* plot = app.add_subcommand("plot-data", "per-frame ground truth and prediction curves");
  add_common(plot, plot_c);
  add_data(plot, plot_d);
  std::string plot_ckpt, plot_out;
  plot->add_option("--checkpoint", plot_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "curves CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    const CLI::App* sub = nullptr;
    for (const CLI::App* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kInvalid;
  }

  try {
    if (*synth) {
      const RunConfig config = resolve_config(synth_c, roster, err, true);
      const auto records = generate_synthetic(config.synth, roster);
      fs::create_directories(synth_dir);
      save_dataset(records, roster, fs::path(synth_dir) / "detections.csv", fs::path(synth_dir) / "annotations.csv");
      err << "wrote " << records.size() << " videos to " << synth_dir << '\n';
    } else if (*import) {
      std::vector<VideoRecord> records;
      for (const auto& [id, files] : cholec80_files(phase_dir, tool_dir)) {
        records.push_back(import_cholec80(id, io::read_file(files.first), io::read_file(files.second), roster));
      }
      io::write_file_atomic(import_out, annotations_csv(records, roster));
      if (!import_det_out.empty()) io::write_file_atomic(import_det_out, detections_csv({}));
      err << "imported " << records.size() << " videos\n";
    } else if (*train_cmd) {
      const RunConfig config = resolve_config(train_c, roster, err);
      const auto records = load_dataset(train_d.detections, train_d.annotations, roster);
      const TaskSpec task = TaskSpec::parse(config.task);
      const TrainResult result = train(records, task, roster, config.train, [&](const EpochStats& s) {
        err << "epoch " << s.epoch << " loss " << io::format_double(s.train_loss);
        if (s.val_wmae) err << " val_wmae " << io::format_double(*s.val_wmae);
        err << '\n';
      });
      save_checkpoint(Checkpoint{task.name(), result.best}, train_out);
      if (!trace_out.empty()) io::write_file_atomic(trace_out, loss_trace_csv(result));
      err << "initial loss " << io::format_double(result.initial_loss) << ", final loss "
          << io::format_double(result.final_loss) << ", checkpoint from epoch " << result.best_epoch << '\n';
    } else if (*eval_cmd) {
      RunConfig config = resolve_config(eval_c, roster, err);
      const Checkpoint ckpt = load_checkpoint(eval_ckpt);
      const TaskSpec task = TaskSpec::parse(ckpt.task);
      const auto records = load_dataset(eval_d.detections, eval_d.annotations, roster);
      EvalOptions options{eval_jobs.value_or(config.jobs), true};
      const MetricReport report =
          evaluate(select_videos(records, config.train.test_videos), ckpt.params, task, roster, options);
      write_or_print(eval_out, report.to_csv(), out);
      err << "mean latency " << io::format_double(report.mean_latency_seconds) << " s/frame over "
          << report.latency_frames << " frames\n";
    } else if (*infer) {
      resolve_config(infer_c, roster, err);
      const Checkpoint ckpt = load_checkpoint(infer_ckpt);
      const TaskSpec task = TaskSpec::parse(ckpt.task);
      if (!infer_stream && infer_det.empty()) throw ConfigError("infer needs --stream or --detections");
      std::ostringstream buffer;
      const bool to_stdout = infer_out.empty() || infer_out == "-";
      std::ostream& sink = to_stdout ? out : buffer;
      if (infer_stream) {
        stream_predictions(in, sink, ckpt.params, task, roster, to_stdout);
      } else {
        std::istringstream file(io::read_file(infer_det));
        stream_predictions(file, sink, ckpt.params, task, roster, false);
      }
      if (!to_stdout) io::write_file_atomic(infer_out, buffer.str());
    } else if (*ablate) {
      const RunConfig config = resolve_config(ablate_c, roster, err);
      const auto records = load_dataset(ablate_d.detections, ablate_d.annotations, roster);
      const TaskSpec task = TaskSpec::parse(config.task);
      const auto rows = run_ablation(records, task, roster, config.train, standard_ablation(config.train.model.horizons),
                                     config.train.test_videos, [&](const AblationRow& r) {
                                       err << r.setting.label << " mean inMAE "
                                           << (r.mean_in_mae() ? io::format_double(*r.mean_in_mae()) : "NA") << '\n';
                                     });
      io::write_file_atomic(ablate_out, ablation_csv(rows, config.train.model.horizons));
    } else if (*plot) {
      const RunConfig config = resolve_config(plot_c, roster, err);
      const Checkpoint ckpt = load_checkpoint(plot_ckpt);
      const TaskSpec task = TaskSpec::parse(ckpt.task);
      const auto records = load_dataset(plot_d.detections, plot_d.annotations, roster);
      const auto preds = run_predictions(select_videos(records, config.train.test_videos), ckpt.params, task, roster,
                                         EvalOptions{config.jobs, false});
      io::write_file_atomic(plot_out, plot_data_csv(preds, ckpt.params.config, task));
    }
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace gwa::cli
