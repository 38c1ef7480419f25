#include "gwa/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "gwa/error.hpp"

namespace gwa {

NodeRoster::NodeRoster(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) throw ConfigError("node roster needs the centre node and at least one instrument");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (l.empty()) throw ConfigError("empty node label");
    if (!seen.insert(l).second) throw ConfigError("duplicate node label '" + l + "'");
  }
}

NodeRoster NodeRoster::cholec80() {
  return NodeRoster({"CenterViewpoint", "Grasper", "Bipolar", "Hook", "Scissors", "Clipper", "Irrigator",
                     "SpecimenBag"});
}

std::size_t NodeRoster::index_of(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw DataError("unknown node label '" + label + "'");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string to_string(TopologyMode mode) {
  return mode == TopologyMode::kPriorKnowledge ? "prior" : "full";
}

TopologyMode parse_topology_mode(const std::string& text) {
  if (text == "prior") return TopologyMode::kPriorKnowledge;
  if (text == "full") return TopologyMode::kFullyConnected;
  throw ConfigError("topology must be 'prior' or 'full', got '" + text + "'");
}

std::vector<std::size_t> default_hubs() { return {0, 1, 3}; }

Tensor normalize_adjacency(const Tensor& adjacency) {
  if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols()) {
    throw ContractError("adjacency must be square, got " + shape_string(adjacency.shape()));
  }
  const std::size_t n = adjacency.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw ContractError("adjacency diagonal must be zero");
    for (std::size_t j = 0; j < n; ++j) {
      if (adjacency(i, j) != adjacency(j, i)) throw ContractError("adjacency must be symmetric");
      if (adjacency(i, j) < 0.0) throw ContractError("adjacency entries must be nonnegative");
    }
  }
  std::vector<double> degree(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) degree[i] += adjacency(i, j);
  // One rounding per entry: (A+I)_ij / sqrt(d_i d_j).
  Tensor out(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out(i, j) = (adjacency(i, j) + (i == j ? 1.0 : 0.0)) / std::sqrt(degree[i] * degree[j]);
  return out;
}

GraphTopology build_topology(const NodeRoster& roster, TopologyMode mode, std::vector<std::size_t> hubs) {
  const std::size_t n = roster.size();
  std::sort(hubs.begin(), hubs.end());
  hubs.erase(std::unique(hubs.begin(), hubs.end()), hubs.end());
  for (std::size_t h : hubs) {
    if (h >= n) throw ConfigError("hub index " + std::to_string(h) + " outside roster of " + std::to_string(n));
  }
  Tensor adj(Shape{n, n});
  std::vector<bool> is_hub(n, false);
  for (std::size_t h : hubs) is_hub[h] = true;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool edge = mode == TopologyMode::kFullyConnected || is_hub[i] || is_hub[j];
      adj(i, j) = edge ? 1.0 : 0.0;
    }
  Tensor norm = normalize_adjacency(adj);
  return GraphTopology{roster, mode, std::move(hubs), std::move(adj), std::move(norm)};
}

void validate_detection(const Detection& d, const NodeRoster& roster) {
  if (d.class_id == 0 || d.class_id >= roster.size()) {
    throw DataError("detection class id " + std::to_string(d.class_id) + " outside roster 1.." +
                    std::to_string(roster.size() - 1));
  }
  for (double v : {d.cx, d.cy, d.w, d.h, d.confidence}) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("detection value outside [0,1] at frame " + std::to_string(d.frame));
  }
}

namespace {

// Winner per class for one frame: index into `detections` or -1.
void place(std::span<const Detection> detections, std::span<const std::size_t> indices, std::size_t nodes,
           double* out) {
  std::vector<long> best(nodes, -1);
  for (std::size_t idx : indices) {
    const Detection& d = detections[idx];
    long& b = best[d.class_id];
    if (b < 0 || d.confidence > detections[static_cast<std::size_t>(b)].confidence) b = static_cast<long>(idx);
  }
  std::fill(out, out + nodes * kNodeFeatures, 0.0);
  std::copy(std::begin(kCenterFeature), std::end(kCenterFeature), out);
  for (std::size_t c = 1; c < nodes; ++c) {
    if (best[c] < 0) continue;
    const Detection& d = detections[static_cast<std::size_t>(best[c])];
    double* row = out + c * kNodeFeatures;
    row[0] = d.cx;
    row[1] = d.cy;
    row[2] = d.w;
    row[3] = d.h;
  }
}

}  // namespace

void frame_features(std::span<const Detection> detections, const NodeRoster& roster, double* out) {
  std::vector<std::size_t> idx(detections.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    validate_detection(detections[i], roster);
    idx[i] = i;
  }
  place(detections, idx, roster.size(), out);
}

GraphSequence frames_to_sequence(std::span<const Detection> detections, std::size_t frames,
                                 const NodeRoster& roster) {
  const std::size_t n = roster.size();
  std::vector<std::vector<std::size_t>> by_frame(frames);
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    validate_detection(d, roster);
    if (d.frame < 1 || static_cast<std::size_t>(d.frame) > frames) {
      throw DataError("detection frame " + std::to_string(d.frame) + " outside 1.." + std::to_string(frames));
    }
    by_frame[static_cast<std::size_t>(d.frame - 1)].push_back(i);
  }
  GraphSequence seq{Tensor(Shape{frames, n, kNodeFeatures})};
  for (std::size_t t = 0; t < frames; ++t) place(detections, by_frame[t], n, seq.features.ptr() + t * n * kNodeFeatures);
  return seq;
}

}  // namespace gwa
