#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gwa/numerics/ops.hpp"

namespace gwa {

inline constexpr double kFramesPerMinute = 60.0;  // targets are minutes, frames are 1 fps

// Closed 1-based frame interval.
struct Interval {
  int start = 0;
  int end = 0;
  bool operator==(const Interval&) const = default;
};

// Presence intervals of one class, sorted and non-overlapping.
using Occurrences = std::vector<Interval>;

// Per class presence intervals.
struct OccurrenceTrack {
  std::vector<Occurrences> classes;
  bool operator==(const OccurrenceTrack&) const = default;
};

// Throws DataError when intervals are unsorted, overlap or leave [1, frames].
void validate_occurrences(const Occurrences& occ, std::size_t frames);

// Remaining minutes until the next occurrence, clipped to h: 0 inside an
// interval, h once the next start is h or more minutes away or never comes.
std::vector<double> remaining_time(const Occurrences& occ, std::size_t frames, double horizon);

// One T x C matrix per horizon.
struct AnticipationTarget {
  std::vector<double> horizons;
  std::vector<Tensor> per_horizon;
};

AnticipationTarget make_targets(const OccurrenceTrack& track, std::size_t frames, const std::vector<double>& horizons);

// Frame filters. Boundaries are fixed:
//   in:   0 < gt < h
//   out:  gt == h
//   p:    0.1h < pred < 0.9h
//   e:    0 < gt <= 0.1h
bool in_filter(double gt, double h);
bool out_filter(double gt, double h);
bool p_filter(double pred, double h);
bool e_filter(double gt, double h);

// Each returns nullopt when its filter selects no frame.
std::optional<double> in_mae(std::span<const double> pred, std::span<const double> gt, double h);
std::optional<double> w_mae(std::span<const double> pred, std::span<const double> gt, double h);
std::optional<double> p_mae(std::span<const double> pred, std::span<const double> gt, double h);
std::optional<double> e_mae(std::span<const double> pred, std::span<const double> gt, double h);

struct LossWeights {
  double alpha = 0.9;  // wMAE
  double beta = 0.1;   // inMAE
  double gamma = 0.8;  // pMAE
  double delta = 0.3;  // eMAE
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// Frames that entered a loss term, and terms skipped for an empty filter.
struct LossCounters {
  std::size_t in_frames = 0;
  std::size_t out_frames = 0;
  std::size_t p_frames = 0;
  std::size_t e_frames = 0;
  std::size_t undefined_terms = 0;
  // Frames given nonzero weight without belonging to any filter. Stays zero.
  std::size_t stray_frames = 0;
};

// Weighted four-metric loss of one prediction column as a per-frame weight
// vector: loss = sum_t weight[t] * |pred[t] - gt[t]|. The filters are taken
// from the given (detached) predictions; undefined terms contribute nothing.
std::vector<double> frame_weights(std::span<const double> pred, std::span<const double> gt, double h,
                                  const LossWeights& w, LossCounters* counters = nullptr);

// Same loss evaluated directly from the metric definitions.
double metric_loss(std::span<const double> pred, std::span<const double> gt, double h, const LossWeights& w);

// Sum over stages, enabled horizons and classes of the weighted metric terms.
// Each stage prediction is T x (H*C) with column horizon_index * C + class.
// Slices of other horizons get no gradient.
Var training_loss(const std::vector<Var>& stage_predictions, const AnticipationTarget& targets,
                  const LossWeights& weights, const std::vector<double>& enabled_horizons,
                  LossCounters* counters = nullptr);

// Plain value of training_loss for non-tape predictions.
double training_loss_value(const std::vector<Tensor>& stage_predictions, const AnticipationTarget& targets,
                           const LossWeights& weights, const std::vector<double>& enabled_horizons);

enum class Metric { kIn, kW, kP, kE };
std::string to_string(Metric m);

struct MetricEntry {
  std::string task;
  std::string class_name;  // "mean" for the class average
  double horizon = 0.0;
  Metric metric = Metric::kIn;
  std::optional<double> value;
  std::size_t frames = 0;  // size of the metric's filter
  bool operator==(const MetricEntry&) const = default;
};

struct MetricReport {
  std::vector<MetricEntry> entries;
  double mean_latency_seconds = 0.0;
  std::size_t latency_frames = 0;

  // Class average for (horizon, metric), skipping undefined entries.
  std::optional<double> mean(double horizon, Metric metric) const;
  std::optional<double> value(const std::string& class_name, double horizon, Metric metric) const;
  // "task,class,horizon,metric,value,n_frames" with NA for undefined values.
  std::string to_csv() const;
};

// Pools frames per class x horizon. pred and gt are lists of T_i x C
// matrices per horizon, one per video.
MetricReport compute_report(const std::string& task, const std::vector<std::string>& class_names,
                            const std::vector<double>& horizons,
                            const std::vector<std::vector<Tensor>>& predictions_per_video,
                            const std::vector<AnticipationTarget>& targets_per_video);

}  // namespace gwa
