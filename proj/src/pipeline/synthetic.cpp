#include "gwa/pipeline/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "gwa/error.hpp"

namespace gwa {

SyntheticSpec SyntheticSpec::defaults(const NodeRoster& roster) {
  SyntheticSpec s;
  s.phase_weights = {0.08, 0.30, 0.10, 0.25, 0.07, 0.12, 0.08};
  const std::size_t instruments = roster.size() - 1;
  s.usage.assign(cholec80_phases().size(), std::vector<double>(instruments, 0.0));
  if (roster == NodeRoster::cholec80()) {
    // Columns: Grasper Bipolar Hook Scissors Clipper Irrigator SpecimenBag
    s.usage = {
        {0.9, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0},  // Preparation
        {0.9, 0.1, 0.9, 0.0, 0.0, 0.1, 0.0},  // CalotTriangleDissection
        {0.8, 0.0, 0.1, 0.5, 0.7, 0.0, 0.0},  // ClippingCutting
        {0.9, 0.2, 0.8, 0.0, 0.0, 0.1, 0.0},  // GallbladderDissection
        {0.7, 0.0, 0.0, 0.0, 0.0, 0.0, 0.9},  // GallbladderPackaging
        {0.6, 0.6, 0.1, 0.0, 0.0, 0.7, 0.0},  // CleaningCoagulation
        {0.7, 0.0, 0.0, 0.0, 0.0, 0.1, 0.6},  // GallbladderRetraction
    };
  } else {
    for (auto& row : s.usage) std::fill(row.begin(), row.end(), 0.3);
  }
  return s;
}

void SyntheticSpec::validate(const NodeRoster& roster) const {
  const std::size_t phases = cholec80_phases().size();
  if (videos == 0) throw ConfigError("synthetic spec asks for zero videos");
  if (min_frames == 0 || max_frames == 0) throw ConfigError("synthetic videos need at least one frame");
  if (min_frames > max_frames) throw ConfigError("synthetic min_frames exceeds max_frames");
  if (min_frames < phases) throw ConfigError("synthetic videos need at least one frame per phase");
  if (phase_weights.size() != phases) throw ConfigError("need one phase weight per phase");
  for (double w : phase_weights)
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("phase weights must be positive");
  if (usage.size() != phases) throw ConfigError("usage table needs one row per phase");
  for (const auto& row : usage) {
    if (row.size() != roster.size() - 1) throw ConfigError("usage table needs one column per instrument");
    for (double p : row)
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("usage probabilities must lie in [0,1]");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be nonnegative");
  if (segment_min == 0 || segment_min > segment_max) throw ConfigError("bad segment length range");
}

namespace {

std::vector<std::size_t> phase_lengths(const SyntheticSpec& spec, std::size_t frames, std::mt19937_64& rng) {
  const std::size_t phases = spec.phase_weights.size();
  std::uniform_real_distribution<double> jitter(0.7, 1.3);
  std::vector<double> w(phases);
  double total = 0.0;
  for (std::size_t p = 0; p < phases; ++p) total += (w[p] = spec.phase_weights[p] * jitter(rng));
  std::vector<std::size_t> len(phases);
  std::size_t used = 0;
  for (std::size_t p = 0; p < phases; ++p) {
    len[p] = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(w[p] / total * static_cast<double>(frames))));
    used += len[p];
  }
  // Settle rounding on the longest phase.
  auto longest = std::max_element(len.begin(), len.end());
  if (used > frames) {
    *longest -= used - frames;
  } else {
    *longest += frames - used;
  }
  return len;
}

}  // namespace

std::vector<VideoRecord> generate_synthetic(const SyntheticSpec& spec, const NodeRoster& roster) {
  spec.validate(roster);
  std::mt19937_64 rng(spec.seed);
  const std::size_t instruments = roster.size() - 1;
  std::vector<VideoRecord> out;
  for (std::size_t v = 0; v < spec.videos; ++v) {
    std::uniform_int_distribution<std::size_t> length(spec.min_frames, spec.max_frames);
    const std::size_t frames = length(rng);
    VideoRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%03zu", v);
    r.video_id = id;
    r.frames = frames;
    r.phases.classes.resize(spec.phase_weights.size());
    r.instruments.classes.resize(instruments);

    const std::vector<std::size_t> len = phase_lengths(spec, frames, rng);
    std::vector<std::vector<bool>> present(instruments, std::vector<bool>(frames, false));
    std::uniform_int_distribution<std::size_t> segment(spec.segment_min, spec.segment_max);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::size_t begin = 0;
    for (std::size_t p = 0; p < len.size(); ++p) {
      const std::size_t end = begin + len[p];
      r.phases.classes[p].push_back({static_cast<int>(begin + 1), static_cast<int>(end)});
      for (std::size_t k = 0; k < instruments; ++k) {
        for (std::size_t s = begin; s < end;) {
          const std::size_t e = std::min(end, s + segment(rng));
          if (coin(rng) < spec.usage[p][k]) std::fill(present[k].begin() + static_cast<long>(s),
                                                      present[k].begin() + static_cast<long>(e), true);
          s = e;
        }
      }
      begin = end;
    }
    for (std::size_t k = 0; k < instruments; ++k) r.instruments.classes[k] = intervals_from_mask(present[k]);

    std::uniform_real_distribution<double> centre(0.2, 0.8), size(0.05, 0.3), confidence(0.5, 1.0);
    std::normal_distribution<double> step(0.0, 1.0);
    struct Box {
      double cx, cy, w, h;
    };
    std::vector<Box> boxes(instruments);
    for (Box& b : boxes) b = {centre(rng), centre(rng), size(rng), size(rng)};
    auto clip = [](double x) { return std::clamp(x, 0.0, 1.0); };
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < instruments; ++k) {
        Box& b = boxes[k];
        b.cx = clip(b.cx + spec.noise * step(rng));
        b.cy = clip(b.cy + spec.noise * step(rng));
        b.w = clip(b.w + 0.25 * spec.noise * step(rng));
        b.h = clip(b.h + 0.25 * spec.noise * step(rng));
        if (!present[k][t]) continue;
        r.detections.push_back(Detection{static_cast<int>(t + 1), k + 1, b.cx, b.cy, b.w, b.h, confidence(rng)});
      }
    }
    validate_record(r, roster);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace gwa
