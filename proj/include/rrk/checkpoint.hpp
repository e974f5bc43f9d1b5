#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rrk/model_config.hpp"
#include "rrk/tensor.hpp"

namespace rrk {

struct ParamBlob {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

/// Layout: "RRKCKPT1", u32 version, ModelConfig fields, u32 blob count, then
/// per blob u32 name length, name, u32 ndim, u32 dims, f32 values. All
/// little-endian.
struct CheckpointData {
  ModelConfig config;
  std::vector<ParamBlob> params;

  const ParamBlob* find(std::string_view name) const;
  /// Blobs whose name starts with prefix.
  std::vector<const ParamBlob*> with_prefix(std::string_view prefix) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const CheckpointData& ckpt);
/// Throws CorruptionError on a bad magic, version or truncated payload.
CheckpointData decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& ckpt);
CheckpointData load_checkpoint(const std::filesystem::path& path);

void encode_config(std::string& out, const ModelConfig& c);

}  // namespace rrk
