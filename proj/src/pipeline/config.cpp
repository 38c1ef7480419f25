#include "gwa/pipeline/config.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "gwa/error.hpp"
#include "gwa/pipeline/dataset.hpp"
#include "gwa/pipeline/io.hpp"

namespace gwa {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("train.epsilon must be positive");
  loss.validate();
  model.validate();
  auto check_disjoint = [](const std::vector<std::string>& a, const std::vector<std::string>& b, const char* what) {
    for (const auto& id : a)
      if (std::find(b.begin(), b.end(), id) != b.end()) throw ConfigError(std::string(what) + " share video " + id);
  };
  check_disjoint(train_videos, val_videos, "split.train and split.val");
  check_disjoint(train_videos, test_videos, "split.train and split.test");
  check_disjoint(val_videos, test_videos, "split.val and split.test");
}

RunConfig RunConfig::defaults(const NodeRoster& roster) {
  RunConfig c;
  c.synth = SyntheticSpec::defaults(roster);
  c.train.model.num_nodes = roster.size();
  c.train.model.num_classes = TaskSpec::parse(c.task).num_classes();
  return c;
}

namespace {

std::size_t to_size(const std::string& v, const std::string& key) {
  try {
    const long long n = io::parse_int(v, key, 0);
    if (n < 0) throw ConfigError(key + " must be nonnegative");
    return static_cast<std::size_t>(n);
  } catch (const ParseError&) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    return io::parse_double(v, key, 0);
  } catch (const ParseError&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  if (io::trim(v).empty()) return out;
  for (auto& f : io::split_fields(v)) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& f : to_list(v)) out.push_back(to_double(f, key));
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& f : to_list(v)) out.push_back(to_size(f, key));
  return out;
}

template <typename T, typename Fmt>
std::string join(const std::vector<T>& xs, Fmt fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  return out;
}

std::string fmt_double(double v) { return io::format_double(v); }
std::string fmt_bool(bool v) { return v ? "true" : "false"; }

struct Entry {
  ConfigKey info;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define GWA_SIZE(KEY, FIELD, DESC, PUB)                                                 \
  Entry {                                                                                 \
    {KEY, DESC, PUB}, [](RunConfig& c, const std::string& v) { c.FIELD = to_size(v, KEY); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                        \
  }
#define GWA_DOUBLE(KEY, FIELD, DESC, PUB)                                                 \
  Entry {                                                                                   \
    {KEY, DESC, PUB}, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(v, KEY); }, \
        [](const RunConfig& c) { return fmt_double(c.FIELD); }                              \
  }
#define GWA_BOOL(KEY, FIELD, DESC, PUB)                                                 \
  Entry {                                                                                 \
    {KEY, DESC, PUB}, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(v, KEY); }, \
        [](const RunConfig& c) { return fmt_bool(c.FIELD); }                              \
  }
#define GWA_IDS(KEY, FIELD, DESC)                                                        \
  Entry {                                                                                \
    {KEY, DESC, false}, [](RunConfig& c, const std::string& v) { c.FIELD = to_list(v); }, \
        [](const RunConfig& c) { return join(c.FIELD, [](const std::string& s) { return s; }); } \
  }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      Entry{{"task", "anticipation target: instrument (5 classes) or phase (6 classes)", false},
            [](RunConfig& c, const std::string& v) {
              TaskSpec::parse(v);
              c.task = v;
            },
            [](const RunConfig& c) { return c.task; }},
      Entry{{"seed", "training seed (initialisation and video order)", false},
            [](RunConfig& c, const std::string& v) {
              c.train.seed = static_cast<std::uint64_t>(to_size(v, "seed"));
            },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      GWA_SIZE("jobs", jobs, "evaluation worker threads (videos in parallel)", false),
      GWA_SIZE("train.epochs", train.epochs, "training epochs", true),
      GWA_DOUBLE("train.lr", train.adam.learning_rate, "Adam learning rate", true),
      GWA_SIZE("train.batch_size", train.batch_size, "videos per optimizer step", true),
      GWA_DOUBLE("train.beta1", train.adam.beta1, "Adam beta1", false),
      GWA_DOUBLE("train.beta2", train.adam.beta2, "Adam beta2", false),
      GWA_DOUBLE("train.epsilon", train.adam.epsilon, "Adam epsilon", false),
      GWA_DOUBLE("loss.alpha", train.loss.alpha, "wMAE weight", true),
      GWA_DOUBLE("loss.beta", train.loss.beta, "inMAE weight", true),
      GWA_DOUBLE("loss.gamma", train.loss.gamma, "pMAE weight", true),
      GWA_DOUBLE("loss.delta", train.loss.delta, "eMAE weight", true),
      Entry{{"model.horizons", "anticipation horizons in minutes, increasing", true},
            [](RunConfig& c, const std::string& v) { c.train.model.horizons = to_doubles(v, "model.horizons"); },
            [](const RunConfig& c) { return join(c.train.model.horizons, fmt_double); }},
      Entry{{"model.enabled_horizons",
             "horizons trained with their own loss terms ('all' or a subset); others report min(p, h) from the nearest trained horizon",
             false},
            [](RunConfig& c, const std::string& v) {
              if (io::trim(v) == "all") {
                c.all_horizons_enabled = true;
              } else {
                c.all_horizons_enabled = false;
                c.train.model.enabled_horizons = to_doubles(v, "model.enabled_horizons");
              }
            },
            [](const RunConfig& c) {
              return c.all_horizons_enabled ? std::string("all") : join(c.train.model.enabled_horizons, fmt_double);
            }},
      GWA_BOOL("model.use_gc", train.model.use_gc, "graph convolution layers on", false),
      GWA_SIZE("model.gc_layers", train.model.gc_layers, "graph convolution layers", false),
      GWA_SIZE("model.gc_channels", train.model.gc_channels, "graph convolution width", false),
      Entry{{"model.topology", "adjacency: prior (hub edges) or full (complete graph)", false},
            [](RunConfig& c, const std::string& v) { c.train.model.topology = parse_topology_mode(v); },
            [](const RunConfig& c) { return to_string(c.train.model.topology); }},
      Entry{{"model.hubs", "hub node indices for the prior topology (centre, grasper, hook)", true},
            [](RunConfig& c, const std::string& v) { c.train.model.hubs = to_sizes(v, "model.hubs"); },
            [](const RunConfig& c) {
              return join(c.train.model.hubs, [](std::size_t x) { return std::to_string(x); });
            }},
      GWA_BOOL("model.use_tcn", train.model.use_tcn, "temporal convolution stages on", false),
      GWA_SIZE("model.tcn_stages", train.model.tcn_stages, "temporal stages", true),
      GWA_SIZE("model.tcn_layers", train.model.tcn_layers, "layers per temporal stage (dilation 2^l)", true),
      GWA_SIZE("model.tcn_channels", train.model.tcn_channels, "temporal stage width", false),
      GWA_SIZE("model.kernel_size", train.model.kernel_size, "causal convolution kernel size", false),
      GWA_BOOL("model.feed_predictions", train.model.feed_predictions,
               "later stages read the previous stage's predictions instead of its features", false),
      GWA_IDS("split.train", train.train_videos, "training video ids (empty: all)"),
      GWA_IDS("split.val", train.val_videos, "validation video ids for checkpoint selection"),
      GWA_IDS("split.test", train.test_videos, "evaluation video ids (empty: all)"),
      GWA_SIZE("synth.videos", synth.videos, "synthetic videos to generate", false),
      GWA_SIZE("synth.min_frames", synth.min_frames, "shortest synthetic video (frames at 1 fps)", false),
      GWA_SIZE("synth.max_frames", synth.max_frames, "longest synthetic video (frames at 1 fps)", false),
      GWA_DOUBLE("synth.noise", synth.noise, "box random-walk step", false),
      GWA_SIZE("synth.segment_min", synth.segment_min, "shortest instrument usage segment", false),
      GWA_SIZE("synth.segment_max", synth.segment_max, "longest instrument usage segment", false),
      Entry{{"synth.seed", "synthetic data seed", false},
            [](RunConfig& c, const std::string& v) {
              c.synth.seed = static_cast<std::uint64_t>(to_size(v, "synth.seed"));
            },
            [](const RunConfig& c) { return std::to_string(c.synth.seed); }},
      Entry{{"synth.phase_weights", "relative mean phase durations, one per phase", false},
            [](RunConfig& c, const std::string& v) { c.synth.phase_weights = to_doubles(v, "synth.phase_weights"); },
            [](const RunConfig& c) { return join(c.synth.phase_weights, fmt_double); }},
  };
  return table;
}

#undef GWA_SIZE
#undef GWA_DOUBLE
#undef GWA_BOOL
#undef GWA_IDS

const std::string kUsagePrefix = "synth.usage.";

// synth.usage.<Phase>.<Instrument>
std::pair<std::size_t, std::size_t> usage_cell(const std::string& key, const NodeRoster& roster) {
  const std::string rest = key.substr(kUsagePrefix.size());
  const auto dot = rest.find('.');
  if (dot == std::string::npos) throw ConfigError("unknown config key '" + key + "'");
  const auto& phases = cholec80_phases();
  auto it = std::find(phases.begin(), phases.end(), rest.substr(0, dot));
  if (it == phases.end()) throw ConfigError("unknown phase in config key '" + key + "'");
  std::size_t instrument = 0;
  try {
    instrument = roster.index_of(rest.substr(dot + 1));
  } catch (const DataError&) {
    throw ConfigError("unknown instrument in config key '" + key + "'");
  }
  if (instrument == 0) throw ConfigError("the centre node has no usage probability");
  return {static_cast<std::size_t>(it - phases.begin()), instrument - 1};
}

}  // namespace

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> keys;
  for (const Entry& e : entries()) keys.push_back(e.info);
  keys.push_back({"synth.usage.<Phase>.<Instrument>", "per-segment usage probability of an instrument in a phase",
                  false});
  return keys;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value, const NodeRoster& roster) {
  if (key.rfind(kUsagePrefix, 0) == 0) {
    const auto [p, k] = usage_cell(key, roster);
    const double prob = to_double(value, key);
    config.synth.usage.at(p).at(k) = prob;
    return;
  }
  for (const Entry& e : entries()) {
    if (e.info.key == key) {
      e.set(config, std::string(io::trim(value)));
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_override(RunConfig& config, const std::string& assignment, const NodeRoster& roster) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  apply_setting(config, std::string(io::trim(assignment.substr(0, eq))), assignment.substr(eq + 1), roster);
}

void apply_text(RunConfig& config, const std::string& text, const std::string& source, const NodeRoster& roster) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (io::trim(line).empty()) continue;
    try {
      apply_override(config, line, roster);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

std::string get_setting(const RunConfig& config, const std::string& key, const NodeRoster& roster) {
  if (key.rfind(kUsagePrefix, 0) == 0) {
    const auto [p, k] = usage_cell(key, roster);
    return fmt_double(config.synth.usage.at(p).at(k));
  }
  for (const Entry& e : entries())
    if (e.info.key == key) return e.get(config);
  throw ConfigError("unknown config key '" + key + "'");
}

std::string dump_config(const RunConfig& config, const NodeRoster& roster) {
  std::ostringstream os;
  for (const Entry& e : entries()) os << e.info.key << '=' << e.get(config) << '\n';
  const auto& phases = cholec80_phases();
  for (std::size_t p = 0; p < config.synth.usage.size() && p < phases.size(); ++p)
    for (std::size_t k = 0; k < config.synth.usage[p].size(); ++k)
      os << kUsagePrefix << phases[p] << '.' << roster.label(k + 1) << '=' << fmt_double(config.synth.usage[p][k])
         << '\n';
  return os.str();
}

void resolve(RunConfig& config, const NodeRoster& roster) {
  const TaskSpec task = TaskSpec::parse(config.task);
  ModelConfig& m = config.train.model;
  m.num_nodes = roster.size();
  m.num_classes = task.num_classes();
  if (config.all_horizons_enabled) m.enabled_horizons = m.horizons;
  if (config.jobs == 0) throw ConfigError("jobs must be >= 1");
  config.train.validate();
}

std::string config_help(const NodeRoster& roster) {
  const RunConfig defaults = RunConfig::defaults(roster);
  std::ostringstream os;
  os << "Configuration keys (config file lines or --set key=value). [published] marks defaults from the published setup.\n";
  for (const Entry& e : entries()) {
    os << "  " << e.info.key << '=' << e.get(defaults) << (e.info.published ? "  [published]" : "") << "\n      "
       << e.info.description << '\n';
  }
  os << "  synth.usage.<Phase>.<Instrument>=<p>\n      per-segment usage probability of an instrument in a phase\n";
  return os.str();
}

}  // namespace gwa
