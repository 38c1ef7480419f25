#pragma once

#include <string>
#include <vector>

#include "gwa/pipeline/evaluate.hpp"
#include "gwa/pipeline/train.hpp"

namespace gwa {

// One configuration of the component study: graph convolution, prior
// knowledge topology (fully connected when off), temporal stages, and the
// horizons that get their own loss terms.
struct AblationSetting {
  std::string label;
  bool use_gc = true;
  bool prior_topology = true;
  bool use_tcn = true;
  std::vector<double> horizon_learning;  // empty: only the largest horizon has a loss
  bool reference = false;                // the full model

  void apply(ModelConfig& model) const;
};

// The nine standard rows: GC; GC+GPK; TC; GC+TC; GC+GPK+TC; then GC+GPK+TC
// with horizon learning for each single horizon, and finally for all.
std::vector<AblationSetting> standard_ablation(const std::vector<double>& horizons);

struct AblationRow {
  AblationSetting setting;
  MetricReport report;
  double final_train_loss = 0.0;
  std::vector<std::optional<double>> in_mae;  // class-mean inMAE per horizon
  std::optional<double> mean_in_mae() const;  // over horizons
};

using AblationCallback = std::function<void(const AblationRow&)>;

// Trains every setting from the same seed on the training split and
// evaluates it on `eval_ids` (empty: the training videos).
std::vector<AblationRow> run_ablation(const std::vector<VideoRecord>& records, const TaskSpec& task,
                                      const NodeRoster& roster, const TrainConfig& base,
                                      const std::vector<AblationSetting>& settings,
                                      const std::vector<std::string>& eval_ids, const AblationCallback& on_row = {});

// GC,GPK,TC,HL_<h>...,inMAE_h<h>...,reference
std::string ablation_csv(const std::vector<AblationRow>& rows, const std::vector<double>& horizons);

}  // namespace gwa
