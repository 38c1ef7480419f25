#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gwa/anticipation.hpp"
#include "gwa/network.hpp"
#include "gwa/numerics/adam.hpp"
#include "gwa/pipeline/synthetic.hpp"

namespace gwa {

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 1;  // whole videos per optimizer step
  AdamOptions adam;            // learning rate 0.002
  std::uint64_t seed = 0;
  LossWeights loss;
  ModelConfig model;
  std::vector<std::string> train_videos;  // empty: every video
  std::vector<std::string> val_videos;
  std::vector<std::string> test_videos;   // empty: every video

  void validate() const;
};

// Everything a CLI run can configure. Text form is one key=value per line
// with '#' comments; see config_keys() for the vocabulary.
struct RunConfig {
  std::string task = "instrument";
  TrainConfig train;
  SyntheticSpec synth;
  std::size_t jobs = 1;
  // model.enabled_horizons=all: follow model.horizons.
  bool all_horizons_enabled = true;

  static RunConfig defaults(const NodeRoster& roster);
};

struct ConfigKey {
  std::string key;
  std::string description;
  bool published = false;  // default taken from the published setup
};

std::vector<ConfigKey> config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value, const NodeRoster& roster);
void apply_text(RunConfig& config, const std::string& text, const std::string& source, const NodeRoster& roster);
// "key=value"
void apply_override(RunConfig& config, const std::string& assignment, const NodeRoster& roster);

std::string get_setting(const RunConfig& config, const std::string& key, const NodeRoster& roster);
// Fully resolved config as key=value lines in config_keys() order.
std::string dump_config(const RunConfig& config, const NodeRoster& roster);

// Binds task-dependent model fields (class count, node count) and validates.
void resolve(RunConfig& config, const NodeRoster& roster);

// Help text listing every key and its default; published defaults are marked.
std::string config_help(const NodeRoster& roster);

}  // namespace gwa
