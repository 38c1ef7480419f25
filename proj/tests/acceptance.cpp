// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Slow (the overfit and ablation checks train full-size models); ctest gives
// it a long timeout.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "gwa/anticipation.hpp"
#include "gwa/graph.hpp"
#include "gwa/network.hpp"
#include "gwa/numerics/gradcheck.hpp"
#include "gwa/pipeline/ablation.hpp"
#include "gwa/pipeline/checkpoint.hpp"
#include "gwa/pipeline/evaluate.hpp"
#include "gwa/pipeline/io.hpp"
#include "gwa/pipeline/synthetic.hpp"
#include "gwa/pipeline/train.hpp"
#include "gwa/streaming.hpp"
#include "support.hpp"

using namespace gwa;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const NodeRoster kRoster = NodeRoster::cholec80();

// Random occurrence intervals over T frames.
Occurrences random_occurrences(std::mt19937_64& rng, std::size_t frames) {
  std::vector<bool> mask(frames, false);
  const std::size_t segments = rng() % 4;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t a = rng() % frames, len = 1 + rng() % 30;
    for (std::size_t t = a; t < std::min(frames, a + len); ++t) mask[t] = true;
  }
  Occurrences out;
  for (std::size_t t = 0; t < frames; ++t) {
    if (!mask[t]) continue;
    if (!out.empty() && out.back().end == static_cast<int>(t)) {
      out.back().end = static_cast<int>(t + 1);
    } else {
      out.push_back({static_cast<int>(t + 1), static_cast<int>(t + 1)});
    }
  }
  return out;
}

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  // T=20, N=4, C=2 at full depth with narrow layers.
  const ModelConfig config = test::small_config(4, 2, 4);
  const NodeRoster roster = test::roster_of(4);
  const GraphTopology topology = topology_for(config, roster);
  const GraphSequence seq = test::random_sequence(20, 4, rng);
  OccurrenceTrack track;
  for (std::size_t c = 0; c < 2; ++c) track.classes.push_back(random_occurrences(rng, 20));
  const AnticipationTarget targets = make_targets(track, 20, config.horizons);
  const ModelParams params = init_params(config, 7);

  std::vector<std::string> names;
  std::vector<Tensor> inputs;
  for (const auto& [name, t] : params.tensors) {
    names.push_back(name);
    inputs.push_back(t);
  }
  const ScalarFn loss = [&](Tape& tape, std::span<const Var> vars) {
    ParamVars bound;
    for (std::size_t i = 0; i < names.size(); ++i) bound.emplace(names[i], vars[i]);
    return training_loss(model_forward(tape, seq, bound, config, topology), targets, LossWeights{},
                         config.enabled_horizons);
  };
  const GradCheckResult r = gradient_check(loss, inputs);
  const double elapsed = seconds_since(t0);
  return {r.max_relative_error < 1e-4 && elapsed < 30.0,
          "max relative error " + num(r.max_relative_error) + " over " + std::to_string(r.coordinates) +
              " parameters (worst " + names[r.worst_input] + "), " + num(elapsed) + " s"};
}

Outcome causality() {
  const ModelConfig config;
  const GraphTopology topology = topology_for(config, kRoster);
  std::mt19937_64 rng(202);
  std::size_t failures = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const ModelParams params = init_params(config, 300 + static_cast<std::uint64_t>(trial));
    const std::size_t T = 10 + rng() % 40;
    GraphSequence seq = test::random_sequence(T, 8, rng);
    const auto full = predict(seq, params, topology);
    const std::size_t t = 1 + rng() % (T - 1);
    const std::size_t row = 8 * kNodeFeatures;

    GraphSequence head{Tensor({t, 8, kNodeFeatures},
                              std::vector<double>(seq.features.data().begin(), seq.features.data().begin() + t * row))};
    const auto part = predict(head, params, topology);
    for (std::size_t s = 0; s < full.size(); ++s) {
      if (!std::equal(part[s].data().begin(), part[s].data().end(), full[s].data().begin())) ++failures;
    }

    // Perturb frame t (0-based) and compare every earlier row.
    for (std::size_t k = 0; k < row; ++k) seq.features[t * row + k] = 1.0 - seq.features[t * row + k];
    const auto moved = predict(seq, params, topology);
    for (std::size_t s = 0; s < full.size(); ++s) {
      const std::size_t width = full[s].size() / T;
      if (!std::equal(moved[s].data().begin(), moved[s].data().begin() + t * width, full[s].data().begin())) {
        ++failures;
      }
    }
  }
  return {failures == 0, "20 random inputs, default widths, " + std::to_string(failures) + " mismatches"};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  std::size_t undefined_mismatch = 0, boundary_hits = 0;
  auto compare = [&](const std::optional<double>& a, const std::optional<double>& b) {
    if (a.has_value() != b.has_value()) {
      ++undefined_mismatch;
      return;
    }
    if (a) worst = std::max(worst, std::abs(*a - *b));
  };
  auto check = [&](const std::vector<double>& pred, const std::vector<double>& gt, double h) {
    const test::NaiveMetrics m = test::naive_metrics(pred, gt, h);
    compare(in_mae(pred, gt, h), m.in);
    compare(w_mae(pred, gt, h), m.w);
    compare(p_mae(pred, gt, h), m.p);
    compare(e_mae(pred, gt, h), m.e);
  };
  for (int trial = 0; trial < 100; ++trial) {
    const double h = std::vector<double>{2, 3, 5}[rng() % 3];
    std::uniform_real_distribution<double> u(0.0, h);
    const std::size_t T = 1 + rng() % 60;
    std::vector<double> pred(T), gt(T);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t pick = rng() % 6;
      gt[t] = pick == 0 ? 0.0 : pick == 1 ? 0.1 * h : pick == 2 ? h : u(rng);
      const std::size_t pp = rng() % 5;
      pred[t] = pp == 0 ? 0.1 * h : pp == 1 ? 0.9 * h : u(rng);
      boundary_hits += pick < 3 || pp < 2;
    }
    check(pred, gt, h);
  }
  // Each boundary on its own.
  for (double h : {2.0, 3.0, 5.0}) {
    for (double g : {0.0, 0.1 * h, h}) {
      for (double p : {0.1 * h, 0.9 * h}) {
        check({p, 0.5 * h, h}, {g, 0.5 * h, 0.05 * h}, h);
        check({p}, {g}, h);
      }
    }
  }
  return {worst <= 1e-12 && undefined_mismatch == 0,
          "max deviation " + num(worst) + ", undefined mismatches " + std::to_string(undefined_mismatch) + ", " +
              std::to_string(boundary_hits) + " boundary frames"};
}

Outcome adjacency() {
  double worst = 0.0;
  std::size_t graphs = 0;
  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    for (std::size_t mask = 0; mask < (std::size_t{1} << pairs.size()); ++mask) {
      Tensor a({n, n});
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (mask >> k & 1) a(pairs[k].first, pairs[k].second) = a(pairs[k].second, pairs[k].first) = 1.0;
      }
      worst = std::max(worst, max_abs_diff(normalize_adjacency(a), test::brute_normalize(a)));
      ++graphs;
    }
  }
  const GraphTopology g = build_topology(kRoster, TopologyMode::kPriorKnowledge);
  worst = std::max(worst, max_abs_diff(g.normalized, test::brute_normalize(g.adjacency)));
  ++graphs;
  return {worst <= 1e-12, std::to_string(graphs) + " graphs, max deviation " + num(worst)};
}

Outcome target_generation() {
  bool ok = true;
  const auto r = remaining_time({{300, 360}}, 420, 2.0);
  ok &= r[179] == 2.0 && r[239] == 1.0 && r[329] == 0.0 && r[399] == 2.0;
  for (double v : remaining_time({}, 50, 2.0)) ok &= v == 2.0;
  for (double v : remaining_time({{1, 50}}, 50, 2.0)) ok &= v == 0.0;
  const bool examples = ok;

  std::mt19937_64 rng(404);
  double worst_slope = 0.0;
  bool bounded = true;
  std::size_t steps = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t T = 30 + rng() % 500;
    const double h = std::vector<double>{2, 3, 5}[rng() % 3];
    const auto rt = remaining_time(random_occurrences(rng, T), T, h);
    for (std::size_t t = 0; t < T; ++t) {
      bounded &= rt[t] >= 0.0 && rt[t] <= h;
      if (t + 1 < T && rt[t] > 0.0 && rt[t] < h && rt[t + 1] < h) {
        worst_slope = std::max(worst_slope, std::abs(rt[t + 1] - rt[t] + 1.0 / kFramesPerMinute));
        ++steps;
      }
    }
  }
  ok &= bounded && worst_slope <= 1e-12;
  return {ok, std::string("examples ") + (examples ? "exact" : "differ") + ", slope deviation " + num(worst_slope) +
                  " over " + std::to_string(steps) + " steps, bounds " + (bounded ? "hold" : "violated")};
}

std::vector<VideoRecord> benchmark_videos() { return generate_synthetic(SyntheticSpec::defaults(kRoster), kRoster); }

TrainConfig overfit_config(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.model.num_nodes = kRoster.size();
  c.model.num_classes = TaskSpec::instrument().num_classes();
  return c;
}

Outcome overfit(const std::vector<VideoRecord>& videos) {
  const auto t0 = Clock::now();
  const TrainResult r = train(videos, TaskSpec::instrument(), kRoster, overfit_config(200));
  const double elapsed = seconds_since(t0);
  const MetricReport report =
      evaluate(select_videos(videos, {}), r.final_params, TaskSpec::instrument(), kRoster, EvalOptions{1, false});
  const auto in2 = report.mean(2.0, Metric::kIn);
  const double ratio = r.final_loss / r.initial_loss;
  std::size_t frames = 0;
  for (const auto& v : videos) frames += v.frames;
  return {ratio < 0.1 && in2 && *in2 < 0.3 && elapsed < 600.0,
          std::to_string(videos.size()) + " videos / " + std::to_string(frames) + " frames, 200 epochs: loss " +
              num(r.initial_loss) + " -> " + num(r.final_loss) + " (x" + num(ratio) + "), inMAE(h=2) " +
              (in2 ? num(*in2) : "NA") + " min, " + num(elapsed) + " s"};
}

Outcome output_contract() {
  const ModelConfig config;
  const ModelParams params = init_params(config, 5);
  const GraphTopology topology = topology_for(config, kRoster);
  std::mt19937_64 rng(505);
  const GraphSequence seq = test::random_sequence(64, 8, rng);
  bool ok = config.output_width() == 15;
  for (const Tensor& y : predict(seq, params, topology)) {
    ok &= y.shape() == Shape{64, 3, 5};
    for (std::size_t t = 0; t < 64; ++t)
      for (std::size_t hi = 0; hi < 3; ++hi)
        for (std::size_t c = 0; c < 5; ++c) ok &= y(t, hi, c) > 0.0 && y(t, hi, c) < config.horizons[hi];
  }
  StreamingModel model(params, topology);
  const auto out = model.step(seq.features.data().subspan(0, 32));
  ok &= out.size() == 15;
  return {ok, "H=3, C=5: " + std::to_string(out.size()) + " values per frame, all inside (0,h)"};
}

Outcome latency() {
  SyntheticSpec spec = SyntheticSpec::defaults(kRoster);
  spec.videos = 1;
  spec.min_frames = spec.max_frames = 1200;
  spec.seed = 6;
  const auto videos = generate_synthetic(spec, kRoster);
  ModelConfig config;
  const ModelParams params = init_params(config, 6);
  const auto preds = run_predictions(select_videos(videos, {}), params, TaskSpec::instrument(), kRoster, EvalOptions{});
  const double mean = preds[0].latency_seconds / static_cast<double>(videos[0].frames);
  return {mean <= 0.030, num(mean * 1e3) + " ms per frame over " + std::to_string(videos[0].frames) +
                             " frames (graph assembly + forward, default widths)"};
}

Outcome ablation(const std::vector<VideoRecord>& videos) {
  const auto t0 = Clock::now();
  const TrainConfig base = overfit_config(100);
  const auto rows = run_ablation(videos, TaskSpec::instrument(), kRoster, base, standard_ablation(base.model.horizons), {},
                                 [](const AblationRow& r) {
                                   std::fprintf(stderr, "  %-20s mean inMAE %s\n", r.setting.label.c_str(),
                                                r.mean_in_mae() ? num(*r.mean_in_mae()).c_str() : "NA");
                                 });
  std::optional<double> reference, best_other;
  std::string best_label;
  for (const auto& r : rows) {
    const auto m = r.mean_in_mae();
    if (!m) continue;
    if (r.setting.reference) {
      reference = m;
    } else if (!best_other || *m < *best_other) {
      best_other = m;
      best_label = r.setting.label;
    }
  }
  const bool ok = rows.size() == 9 && reference && best_other && *reference < *best_other;
  return {ok, std::to_string(rows.size()) + " rows; full " + (reference ? num(*reference) : "NA") + " vs best other " +
                  (best_other ? num(*best_other) : "NA") + " (" + best_label + "), " + num(seconds_since(t0)) + " s"};
}

Outcome determinism() {
  SyntheticSpec spec = SyntheticSpec::defaults(kRoster);
  spec.videos = 2;
  spec.min_frames = 80;
  spec.max_frames = 100;
  const auto videos = generate_synthetic(spec, kRoster);
  auto run = [&] {
    TrainConfig c = overfit_config(3);
    c.seed = 17;
    const TrainResult r = train(videos, TaskSpec::instrument(), kRoster, c);
    const MetricReport report = evaluate(select_videos(videos, {}), r.best, TaskSpec::instrument(), kRoster);
    return std::make_pair(encode_checkpoint(Checkpoint{"instrument", r.best}), report.to_csv() + loss_trace_csv(r));
  };
  const auto a = run();
  const auto b = run();
  return {a == b, "checkpoint " + std::string(a.first == b.first ? "identical" : "differs") + " (" +
                      std::to_string(a.first.size()) + " bytes), report " + (a.second == b.second ? "identical" : "differs")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-24s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };
  report("gradient fidelity", gradient_fidelity);
  report("causality", causality);
  report("metric oracle", metric_oracle);
  report("adjacency normalization", adjacency);
  report("target generation", target_generation);
  report("output contract", output_contract);
  report("latency", latency);
  report("determinism", determinism);
  const auto videos = benchmark_videos();
  report("overfit regression", [&] { return overfit(videos); });
  report("ablation harness", [&] { return ablation(videos); });
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
