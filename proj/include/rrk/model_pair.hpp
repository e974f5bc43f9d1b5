#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rrk/checkpoint.hpp"
#include "rrk/reranker.hpp"

namespace rrk {

enum class CompressorMode { Frozen, FromScratch, Finetune };

/// Accepts frozen|frozen_compressor, scratch|from_scratch, finetune.
CompressorMode parse_compressor_mode(const std::string& s);
const char* compressor_mode_name(CompressorMode m);

struct ModelPairOptions {
  CompressorMode mode = CompressorMode::Finetune;
  std::uint64_t seed = 0;
  /// Pretrained weights for frozen/finetune: "compressor.*", plus
  /// "reranker.*" and "head.*" when the checkpoint has them.
  std::optional<std::filesystem::path> compressor_checkpoint;
  std::vector<Projection> adapter_targets{Projection::Q, Projection::V};
};

/// Compressor (theta_c), reranker (theta_r) and the pointwise head, with
/// separate weights over one architecture.
template <typename T>
struct ModelPair {
  Transformer<T> compressor;
  Transformer<T> reranker;
  PointwiseHead<T> head;
  CompressorMode mode = CompressorMode::Finetune;
  std::uint64_t step = 0;

  /// finetune without a checkpoint throws MissingCheckpointError.
  static ModelPair create(const ModelConfig& config, const ModelPairOptions& options);
  static ModelPair from_checkpoint(const CheckpointData& ckpt);

  const ModelConfig& config() const { return reranker.config(); }

  /// Everything that receives gradients under the current mode.
  std::vector<Tensor<T>> trainable_parameters(bool include_head) const;
  /// All compressor weights including adapters.
  std::vector<NamedTensor<T>> compressor_parameters() const { return compressor.named_parameters(); }

  CheckpointData to_checkpoint() const;

  template <typename U>
  ModelPair<U> cast() const;
};

/// Copies "prefix + name" blobs into model, attaching adapters first for any
/// lora blobs present. Throws CorruptionError on missing or misshapen blobs.
template <typename T>
void load_transformer(Transformer<T>& model, const CheckpointData& ckpt, const std::string& prefix);

template <typename T>
void append_blobs(CheckpointData& ckpt, const std::string& prefix,
                  const std::vector<NamedTensor<T>>& params);

extern template struct ModelPair<float>;
extern template struct ModelPair<double>;

}  // namespace rrk
