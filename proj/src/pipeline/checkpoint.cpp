#include "gwa/pipeline/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>
#include <sstream>

#include "gwa/error.hpp"
#include "gwa/pipeline/io.hpp"

namespace gwa {

namespace {

constexpr char kMagic[8] = {'G', 'W', 'A', 'C', 'K', 'P', 'T', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw DataError(source_ + ": truncated checkpoint");
  }
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + io::format_double(xs[i]);
  return s;
}

}  // namespace

std::string model_config_text(const ModelConfig& c) {
  std::ostringstream os;
  std::string hubs;
  for (std::size_t i = 0; i < c.hubs.size(); ++i) hubs += (i ? "," : "") + std::to_string(c.hubs[i]);
  os << "num_nodes=" << c.num_nodes << '\n'
     << "in_channels=" << c.in_channels << '\n'
     << "gc_layers=" << c.gc_layers << '\n'
     << "gc_channels=" << c.gc_channels << '\n'
     << "tcn_stages=" << c.tcn_stages << '\n'
     << "tcn_layers=" << c.tcn_layers << '\n'
     << "tcn_channels=" << c.tcn_channels << '\n'
     << "kernel_size=" << c.kernel_size << '\n'
     << "horizons=" << join_doubles(c.horizons) << '\n'
     << "num_classes=" << c.num_classes << '\n'
     << "topology=" << to_string(c.topology) << '\n'
     << "hubs=" << hubs << '\n'
     << "use_gc=" << (c.use_gc ? 1 : 0) << '\n'
     << "use_tcn=" << (c.use_tcn ? 1 : 0) << '\n'
     << "enabled_horizons=" << join_doubles(c.enabled_horizons) << '\n'
     << "feed_predictions=" << (c.feed_predictions ? 1 : 0) << '\n';
  return os.str();
}

ModelConfig parse_model_config(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(source + ": bad config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw DataError(source + ": checkpoint config lacks '" + key + "'");
    return it->second;
  };
  auto size = [&](const char* key) { return static_cast<std::size_t>(io::parse_int(get(key), source, 0)); };
  auto doubles = [&](const char* key) {
    std::vector<double> out;
    const std::string& v = get(key);
    if (!v.empty())
      for (const auto& f : io::split_fields(v)) out.push_back(io::parse_double(f, source, 0));
    return out;
  };
  ModelConfig c;
  c.num_nodes = size("num_nodes");
  c.in_channels = size("in_channels");
  c.gc_layers = size("gc_layers");
  c.gc_channels = size("gc_channels");
  c.tcn_stages = size("tcn_stages");
  c.tcn_layers = size("tcn_layers");
  c.tcn_channels = size("tcn_channels");
  c.kernel_size = size("kernel_size");
  c.horizons = doubles("horizons");
  c.num_classes = size("num_classes");
  c.topology = parse_topology_mode(get("topology"));
  c.hubs.clear();
  if (!get("hubs").empty())
    for (const auto& f : io::split_fields(get("hubs"))) c.hubs.push_back(static_cast<std::size_t>(io::parse_int(f, source, 0)));
  c.use_gc = size("use_gc") != 0;
  c.use_tcn = size("use_tcn") != 0;
  c.enabled_horizons = doubles("enabled_horizons");
  c.feed_predictions = size("feed_predictions") != 0;
  return c;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_bytes(out, "task=" + ckpt.task + "\n" + model_config_text(ckpt.params.config));
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.tensors.size()));
  for (const auto& [name, t] : ckpt.params.tensors) {
    put_bytes(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u64(out, d);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
  Reader r(bytes, source);
  if (r.bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw DataError(source + ": not a checkpoint");
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) {
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::string config = r.bytes(r.uint(4));
  Checkpoint ckpt;
  const std::string task_prefix = "task=";
  if (config.rfind(task_prefix, 0) != 0) throw DataError(source + ": checkpoint config lacks the task");
  const auto nl = config.find('\n');
  ckpt.task = config.substr(task_prefix.size(), nl - task_prefix.size());
  ckpt.params.config = parse_model_config(config.substr(nl + 1), source);
  try {
    ckpt.params.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(source + ": " + e.what());
  }

  const auto count = r.uint(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.uint(4));
    const auto rank = r.uint(4);
    Shape shape;
    for (std::uint64_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.uint(8)));
    std::vector<double> values(shape_size(shape));
    for (double& v : values) v = std::bit_cast<double>(r.uint(8));
    ckpt.params.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw DataError(source + ": trailing bytes after checkpoint");

  // Tensor names and shapes must be exactly what the config implies.
  const ModelParams expected = init_params(ckpt.params.config, 0);
  if (expected.tensors.size() != ckpt.params.tensors.size()) {
    throw DataError(source + ": checkpoint holds " + std::to_string(ckpt.params.tensors.size()) +
                    " tensors, config implies " + std::to_string(expected.tensors.size()));
  }
  for (const auto& [name, t] : expected.tensors) {
    auto it = ckpt.params.tensors.find(name);
    if (it == ckpt.params.tensors.end()) throw DataError(source + ": checkpoint lacks tensor " + name);
    if (it->second.shape() != t.shape()) throw DataError(source + ": tensor " + name + " has the wrong shape");
    require_finite(it->second, name.c_str());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace gwa
