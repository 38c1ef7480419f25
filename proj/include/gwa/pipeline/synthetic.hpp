#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "gwa/pipeline/dataset.hpp"

namespace gwa {

// Desk-scale stand-in for annotated surgical videos: phases follow the
// Cholec80 order with jittered durations, instruments appear in short
// segments according to per-phase usage probabilities, and each instrument's
// box drifts as a clipped random walk.
struct SyntheticSpec {
  std::size_t videos = 5;
  std::size_t min_frames = 280;
  std::size_t max_frames = 320;
  std::vector<double> phase_weights;            // relative mean durations, one per phase
  std::vector<std::vector<double>> usage;       // [phase][instrument] probability per segment
  double noise = 0.02;                          // random-walk step std-dev
  std::size_t segment_min = 10;
  std::size_t segment_max = 40;
  std::uint64_t seed = 0;

  static SyntheticSpec defaults(const NodeRoster& roster);
  void validate(const NodeRoster& roster) const;
};

std::vector<VideoRecord> generate_synthetic(const SyntheticSpec& spec, const NodeRoster& roster);

}  // namespace gwa
