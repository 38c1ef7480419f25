#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "gwa/numerics/tensor.hpp"

namespace gwa {

inline constexpr std::size_t kNodeFeatures = 4;  // cx, cy, w, h

// Ordered node labels. Index 0 is always the centre-viewpoint node, the rest
// are instrument classes.
class NodeRoster {
 public:
  explicit NodeRoster(std::vector<std::string> labels);

  // 0:CenterViewpoint 1:Grasper 2:Bipolar 3:Hook 4:Scissors 5:Clipper
  // 6:Irrigator 7:SpecimenBag
  static NodeRoster cholec80();

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  // Throws DataError for unknown labels.
  std::size_t index_of(const std::string& label) const;
  bool operator==(const NodeRoster&) const = default;

 private:
  std::vector<std::string> labels_;
};

enum class TopologyMode { kPriorKnowledge, kFullyConnected };

std::string to_string(TopologyMode mode);
TopologyMode parse_topology_mode(const std::string& text);

// Default hubs: centre viewpoint, grasper, hook.
std::vector<std::size_t> default_hubs();

struct GraphTopology {
  NodeRoster roster;
  TopologyMode mode;
  std::vector<std::size_t> hubs;
  Tensor adjacency;   // N x N, 0/1, symmetric, zero diagonal
  Tensor normalized;  // Lambda^-1/2 (A + I) Lambda^-1/2
};

GraphTopology build_topology(const NodeRoster& roster, TopologyMode mode,
                             std::vector<std::size_t> hubs = default_hubs());

// Lambda^-1/2 (A + I) Lambda^-1/2 with Lambda_ii = sum_j (A + I)_ij.
// A must be square, symmetric and have a zero diagonal (ContractError).
Tensor normalize_adjacency(const Tensor& adjacency);

struct Detection {
  int frame = 0;  // 1-based, 1 fps
  std::size_t class_id = 0;
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
  double confidence = 0.0;

  bool operator==(const Detection&) const = default;
};

// Row written for the centre-viewpoint node on every frame.
inline constexpr double kCenterFeature[kNodeFeatures] = {0.5, 0.5, 1.0, 1.0};

struct GraphSequence {
  Tensor features;  // T x N x 4
  std::size_t frames() const { return features.dim(0); }
  std::size_t nodes() const { return features.dim(1); }
};

// Places each frame's boxes on their class nodes. When several detections of
// one class share a frame the most confident wins (first one on ties);
// classes without a detection keep a zero row.
GraphSequence frames_to_sequence(std::span<const Detection> detections, std::size_t frames,
                                 const NodeRoster& roster);

// Single-frame variant used by streaming inference: writes an N x 4 block.
void frame_features(std::span<const Detection> detections, const NodeRoster& roster, double* out);

void validate_detection(const Detection& d, const NodeRoster& roster);

}  // namespace gwa
