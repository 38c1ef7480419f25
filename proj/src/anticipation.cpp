#include "gwa/anticipation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gwa/error.hpp"

namespace gwa {

void validate_occurrences(const Occurrences& occ, std::size_t frames) {
  for (std::size_t i = 0; i < occ.size(); ++i) {
    const Interval& iv = occ[i];
    if (iv.start < 1 || iv.end < iv.start || static_cast<std::size_t>(iv.end) > frames) {
      throw DataError("interval [" + std::to_string(iv.start) + "," + std::to_string(iv.end) + "] outside 1.." +
                      std::to_string(frames));
    }
    if (i && iv.start <= occ[i - 1].end) {
      throw DataError("overlapping or unsorted intervals at [" + std::to_string(iv.start) + "," +
                      std::to_string(iv.end) + "]");
    }
  }
}

std::vector<double> remaining_time(const Occurrences& occ, std::size_t frames, double horizon) {
  validate_occurrences(occ, frames);
  std::vector<double> r(frames, horizon);
  std::size_t next = 0;  // first interval whose end is >= t
  for (std::size_t i = 0; i < frames; ++i) {
    const int t = static_cast<int>(i) + 1;
    while (next < occ.size() && occ[next].end < t) ++next;
    if (next == occ.size()) continue;
    if (occ[next].start <= t) {
      r[i] = 0.0;
    } else {
      const double minutes = static_cast<double>(occ[next].start - t) / kFramesPerMinute;
      r[i] = std::min(minutes, horizon);
    }
  }
  return r;
}

AnticipationTarget make_targets(const OccurrenceTrack& track, std::size_t frames, const std::vector<double>& horizons) {
  AnticipationTarget out{horizons, {}};
  const std::size_t classes = track.classes.size();
  for (double h : horizons) {
    Tensor m(Shape{frames, classes});
    for (std::size_t c = 0; c < classes; ++c) {
      const std::vector<double> r = remaining_time(track.classes[c], frames, h);
      for (std::size_t t = 0; t < frames; ++t) m(t, c) = r[t];
    }
    out.per_horizon.push_back(std::move(m));
  }
  return out;
}

bool in_filter(double gt, double h) { return gt > 0.0 && gt < h; }
bool out_filter(double gt, double h) { return gt == h; }
bool p_filter(double pred, double h) { return pred > 0.1 * h && pred < 0.9 * h; }
bool e_filter(double gt, double h) { return gt > 0.0 && gt <= 0.1 * h; }

namespace {

void require_same_length(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("prediction/ground truth lengths differ: " + std::to_string(pred.size()) + " vs " +
                         std::to_string(gt.size()));
  }
}

template <typename Keep>
std::optional<double> filtered_mae(std::span<const double> pred, std::span<const double> gt, Keep keep) {
  require_same_length(pred, gt);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!keep(pred[i], gt[i])) continue;
    total += std::abs(pred[i] - gt[i]);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

std::optional<double> out_mae(std::span<const double> pred, std::span<const double> gt, double h) {
  return filtered_mae(pred, gt, [h](double, double g) { return out_filter(g, h); });
}

}  // namespace

std::optional<double> in_mae(std::span<const double> pred, std::span<const double> gt, double h) {
  return filtered_mae(pred, gt, [h](double, double g) { return in_filter(g, h); });
}

std::optional<double> w_mae(std::span<const double> pred, std::span<const double> gt, double h) {
  const auto inside = in_mae(pred, gt, h);
  const auto outside = out_mae(pred, gt, h);
  if (!inside || !outside) return std::nullopt;
  return (*inside + *outside) / 2.0;
}

std::optional<double> p_mae(std::span<const double> pred, std::span<const double> gt, double h) {
  return filtered_mae(pred, gt, [h](double p, double) { return p_filter(p, h); });
}

std::optional<double> e_mae(std::span<const double> pred, std::span<const double> gt, double h) {
  return filtered_mae(pred, gt, [h](double, double g) { return e_filter(g, h); });
}

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma, delta}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and nonnegative");
  }
}

std::vector<double> frame_weights(std::span<const double> pred, std::span<const double> gt, double h,
                                  const LossWeights& w, LossCounters* counters) {
  require_same_length(pred, gt);
  const std::size_t n = pred.size();
  std::size_t n_in = 0, n_out = 0, n_p = 0, n_e = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(pred[i])) throw NumericError("non-finite prediction in loss");
    n_in += in_filter(gt[i], h);
    n_out += out_filter(gt[i], h);
    n_p += p_filter(pred[i], h);
    n_e += e_filter(gt[i], h);
  }
  const bool has_w = n_in && n_out;
  std::vector<double> weight(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    const bool in = in_filter(gt[i], h);
    if (has_w && in) v += w.alpha * 0.5 / static_cast<double>(n_in);
    if (has_w && out_filter(gt[i], h)) v += w.alpha * 0.5 / static_cast<double>(n_out);
    if (in) v += w.beta / static_cast<double>(n_in);
    if (p_filter(pred[i], h)) v += w.gamma / static_cast<double>(n_p);
    if (e_filter(gt[i], h)) v += w.delta / static_cast<double>(n_e);
    weight[i] = v;
  }
  if (counters) {
    counters->in_frames += n_in;
    counters->out_frames += has_w ? n_out : 0;
    counters->p_frames += n_p;
    counters->e_frames += n_e;
    counters->undefined_terms += !has_w + !n_in + !n_p + !n_e;
    for (std::size_t i = 0; i < n; ++i) {
      const bool filtered =
          in_filter(gt[i], h) || out_filter(gt[i], h) || p_filter(pred[i], h) || e_filter(gt[i], h);
      if (weight[i] != 0.0 && !filtered) ++counters->stray_frames;
    }
  }
  return weight;
}

double metric_loss(std::span<const double> pred, std::span<const double> gt, double h, const LossWeights& w) {
  double loss = 0.0;
  if (auto v = w_mae(pred, gt, h)) loss += w.alpha * *v;
  if (auto v = in_mae(pred, gt, h)) loss += w.beta * *v;
  if (auto v = p_mae(pred, gt, h)) loss += w.gamma * *v;
  if (auto v = e_mae(pred, gt, h)) loss += w.delta * *v;
  return loss;
}

namespace {

struct LossLayout {
  Tensor target;
  Tensor weights;
};

LossLayout loss_layout(const Tensor& pred, const AnticipationTarget& targets, const LossWeights& weights,
                       const std::vector<double>& enabled, LossCounters* counters) {
  const std::size_t hcount = targets.horizons.size();
  if (hcount == 0 || pred.rank() != 2) throw DimensionError("loss needs T x (H*C) predictions");
  const std::size_t frames = pred.rows();
  const std::size_t classes = pred.cols() / hcount;
  if (classes * hcount != pred.cols() || targets.per_horizon.size() != hcount) {
    throw DimensionError("prediction width does not match the target horizons");
  }
  auto enabled_h = [&](double h) { return std::find(enabled.begin(), enabled.end(), h) != enabled.end(); };

  LossLayout out{Tensor(pred.shape()), Tensor(pred.shape())};
  std::vector<double> p(frames), g(frames);
  for (std::size_t hi = 0; hi < hcount; ++hi) {
    const double h = targets.horizons[hi];
    const Tensor& gt = targets.per_horizon[hi];
    if (gt.rows() != frames || gt.cols() != classes) {
      throw DimensionError("target for horizon " + std::to_string(h) + " has shape " + shape_string(gt.shape()));
    }
    const bool own = enabled_h(h);
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t col = hi * classes + c;
      for (std::size_t t = 0; t < frames; ++t) {
        p[t] = pred(t, col);
        g[t] = gt(t, c);
        out.target(t, col) = g[t];
      }
      if (own) {
        const std::vector<double> w = frame_weights(p, g, h, weights, counters);
        for (std::size_t t = 0; t < frames; ++t) out.weights(t, col) = w[t];
      }
    }
  }
  return out;
}

}  // namespace

Var training_loss(const std::vector<Var>& stage_predictions, const AnticipationTarget& targets,
                  const LossWeights& weights, const std::vector<double>& enabled_horizons, LossCounters* counters) {
  if (stage_predictions.empty()) throw DimensionError("no stage predictions");
  std::optional<Var> total;
  for (Var pred : stage_predictions) {
    const LossLayout layout = loss_layout(pred.value(), targets, weights, enabled_horizons, counters);
    Var term = ops::weighted_abs_error(pred, layout.target, layout.weights);
    total = total ? ops::add(*total, term) : term;
  }
  return *total;
}

double training_loss_value(const std::vector<Tensor>& stage_predictions, const AnticipationTarget& targets,
                           const LossWeights& weights, const std::vector<double>& enabled_horizons) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& p : stage_predictions) vars.push_back(tape.constant(p));
  return training_loss(vars, targets, weights, enabled_horizons).value().item();
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kIn:
      return "inMAE";
    case Metric::kW:
      return "wMAE";
    case Metric::kP:
      return "pMAE";
    case Metric::kE:
      return "eMAE";
  }
  return "?";
}

namespace {

constexpr Metric kMetrics[] = {Metric::kIn, Metric::kW, Metric::kP, Metric::kE};

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::size_t filter_size(Metric m, std::span<const double> pred, std::span<const double> gt, double h) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    switch (m) {
      case Metric::kIn:
        n += in_filter(gt[i], h);
        break;
      case Metric::kW:
        n += in_filter(gt[i], h) || out_filter(gt[i], h);
        break;
      case Metric::kP:
        n += p_filter(pred[i], h);
        break;
      case Metric::kE:
        n += e_filter(gt[i], h);
        break;
    }
  }
  return n;
}

std::optional<double> metric_value(Metric m, std::span<const double> pred, std::span<const double> gt, double h) {
  switch (m) {
    case Metric::kIn:
      return in_mae(pred, gt, h);
    case Metric::kW:
      return w_mae(pred, gt, h);
    case Metric::kP:
      return p_mae(pred, gt, h);
    case Metric::kE:
      return e_mae(pred, gt, h);
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> MetricReport::mean(double horizon, Metric metric) const {
  return value("mean", horizon, metric);
}

std::optional<double> MetricReport::value(const std::string& class_name, double horizon, Metric metric) const {
  for (const MetricEntry& e : entries) {
    if (e.class_name == class_name && e.horizon == horizon && e.metric == metric) return e.value;
  }
  return std::nullopt;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "task,class,horizon,metric,value,n_frames\n";
  for (const MetricEntry& e : entries) {
    os << e.task << ',' << e.class_name << ',' << format_double(e.horizon) << ',' << to_string(e.metric) << ','
       << (e.value ? format_double(*e.value) : std::string("NA")) << ',' << e.frames << '\n';
  }
  return os.str();
}

MetricReport compute_report(const std::string& task, const std::vector<std::string>& class_names,
                            const std::vector<double>& horizons,
                            const std::vector<std::vector<Tensor>>& predictions_per_video,
                            const std::vector<AnticipationTarget>& targets_per_video) {
  if (predictions_per_video.size() != targets_per_video.size()) {
    throw DimensionError("prediction and target video counts differ");
  }
  const std::size_t classes = class_names.size();
  MetricReport report;
  // pooled[h][c] = (pred, gt) over all videos in order
  std::vector<std::vector<std::pair<std::vector<double>, std::vector<double>>>> pooled(
      horizons.size(), std::vector<std::pair<std::vector<double>, std::vector<double>>>(classes));
  for (std::size_t v = 0; v < predictions_per_video.size(); ++v) {
    const auto& preds = predictions_per_video[v];
    const auto& tg = targets_per_video[v];
    if (preds.size() != horizons.size() || tg.per_horizon.size() != horizons.size()) {
      throw DimensionError("horizon count mismatch in video " + std::to_string(v));
    }
    for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
      const Tensor& p = preds[hi];
      const Tensor& g = tg.per_horizon[hi];
      if (p.shape() != g.shape() || p.cols() != classes) {
        throw DimensionError("prediction/target shape mismatch in video " + std::to_string(v));
      }
      for (std::size_t c = 0; c < classes; ++c) {
        auto& [pp, gg] = pooled[hi][c];
        for (std::size_t t = 0; t < p.rows(); ++t) {
          pp.push_back(p(t, c));
          gg.push_back(g(t, c));
        }
      }
    }
  }

  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
      const auto& [pp, gg] = pooled[hi][c];
      for (Metric m : kMetrics) {
        report.entries.push_back(MetricEntry{task, class_names[c], horizons[hi], m,
                                             metric_value(m, pp, gg, horizons[hi]),
                                             filter_size(m, pp, gg, horizons[hi])});
      }
    }
  }
  for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
    for (Metric m : kMetrics) {
      double total = 0.0;
      std::size_t defined = 0, frames = 0;
      for (const MetricEntry& e : report.entries) {
        if (e.class_name == "mean" || e.horizon != horizons[hi] || e.metric != m) continue;
        frames += e.frames;
        if (e.value) {
          total += *e.value;
          ++defined;
        }
      }
      std::optional<double> avg;
      if (defined) avg = total / static_cast<double>(defined);
      report.entries.push_back(MetricEntry{task, "mean", horizons[hi], m, avg, frames});
    }
  }
  return report;
}

}  // namespace gwa
