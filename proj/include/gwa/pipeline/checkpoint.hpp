#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gwa/network.hpp"

namespace gwa {

// Binary layout, all integers and doubles little-endian:
//   "GWACKPT\0"                       magic, 8 bytes
//   u32 version                        currently 1
//   u32 n, n bytes                     config block: key=value lines
//   u32 count                          named tensors, then per tensor:
//     u32 n, n bytes name; u32 rank; rank x u64 dims; size x f64 values
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string task;
  ModelParams params;
  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string model_config_text(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text, const std::string& source);

}  // namespace gwa
