#include "gwa/pipeline/ablation.hpp"

#include <algorithm>

#include "gwa/pipeline/io.hpp"

namespace gwa {

void AblationSetting::apply(ModelConfig& model) const {
  model.use_gc = use_gc;
  model.topology = prior_topology ? TopologyMode::kPriorKnowledge : TopologyMode::kFullyConnected;
  model.use_tcn = use_tcn;
  model.enabled_horizons = horizon_learning;
  if (model.enabled_horizons.empty()) model.enabled_horizons = {model.horizons.back()};
}

std::vector<AblationSetting> standard_ablation(const std::vector<double>& horizons) {
  std::vector<AblationSetting> rows = {
      {"GC", true, false, false, {}, false},
      {"GC+GPK", true, true, false, {}, false},
      {"TC", false, false, true, {}, false},
      {"GC+TC", true, false, true, {}, false},
      {"GC+GPK+TC", true, true, true, {}, false},
  };
  for (double h : horizons) {
    rows.push_back({"GC+GPK+TC+HL" + io::format_double(h), true, true, true, {h}, false});
  }
  rows.push_back({"GC+GPK+TC+HL(all)", true, true, true, horizons, true});
  return rows;
}

std::optional<double> AblationRow::mean_in_mae() const {
  double total = 0.0;
  for (const auto& v : in_mae) {
    if (!v) return std::nullopt;
    total += *v;
  }
  if (in_mae.empty()) return std::nullopt;
  return total / static_cast<double>(in_mae.size());
}

std::vector<AblationRow> run_ablation(const std::vector<VideoRecord>& records, const TaskSpec& task,
                                      const NodeRoster& roster, const TrainConfig& base,
                                      const std::vector<AblationSetting>& settings,
                                      const std::vector<std::string>& eval_ids, const AblationCallback& on_row) {
  const std::vector<std::string>& ids = eval_ids.empty() ? base.train_videos : eval_ids;
  const auto eval_set = select_videos(records, ids);
  std::vector<AblationRow> rows;
  for (const AblationSetting& s : settings) {
    TrainConfig config = base;
    s.apply(config.model);
    const TrainResult trained = train(records, task, roster, config);
    AblationRow row{s, evaluate(eval_set, trained.best, task, roster, EvalOptions{1, false}), trained.final_loss, {}};
    for (double h : config.model.horizons) row.in_mae.push_back(row.report.mean(h, Metric::kIn));
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::vector<double>& horizons) {
  std::string out = "label,GC,GPK,TC";
  for (double h : horizons) out += ",HL_" + io::format_double(h);
  for (double h : horizons) out += ",inMAE_h" + io::format_double(h);
  out += ",mean_inMAE,reference\n";
  auto mark = [](bool b) { return std::string(b ? "1" : "0"); };
  auto value = [](const std::optional<double>& v) { return v ? io::format_double(*v) : std::string("NA"); };
  for (const AblationRow& r : rows) {
    const AblationSetting& s = r.setting;
    // GPK only means something when the graph convolution runs.
    out += s.label + "," + mark(s.use_gc) + "," + mark(s.use_gc && s.prior_topology) + "," + mark(s.use_tcn);
    for (double h : horizons) {
      const bool on = std::find(s.horizon_learning.begin(), s.horizon_learning.end(), h) != s.horizon_learning.end();
      out += "," + mark(on);
    }
    for (const auto& v : r.in_mae) out += "," + value(v);
    out += "," + value(r.mean_in_mae()) + "," + mark(s.reference) + "\n";
  }
  return out;
}

}  // namespace gwa
