#pragma once

#include <cstdint>
#include <string>

namespace rrk {

using TokenId = std::uint32_t;

/// Architecture and vocabulary layout shared by the compressor and the
/// reranker. Reserved ids: PAD, SEP, then MEM_1..MEM_l contiguous from
/// mem_first.
struct ModelConfig {
  std::uint32_t vocab_size = 4096;
  std::uint32_t d_model = 128;
  std::uint32_t n_layers = 4;
  std::uint32_t n_heads = 4;
  std::uint32_t d_ff = 512;
  std::uint32_t max_seq_len = 1024;
  std::uint32_t mem_tokens = 8;
  std::uint32_t pad_id = 0;
  std::uint32_t sep_id = 1;
  std::uint32_t mem_first = 2;
  std::uint32_t lora_rank = 8;
  float lora_alpha = 16.0f;
  float rope_base = 10000.0f;
  float norm_eps = 1e-5f;
  float embed_init_std = 1.0f;
  std::uint64_t rng_seed = 0;

  TokenId mem_id(std::uint32_t slot) const { return mem_first + slot; }
  /// Count of ids at the bottom of the vocabulary that the tokenizer never emits.
  std::uint32_t reserved_count() const;

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  /// Also checks that a listwise input of k candidates and queries up to
  /// max_query_len tokens fits in max_seq_len.
  void validate_listwise(std::uint32_t max_query_len, std::uint32_t k) const;

  bool operator==(const ModelConfig&) const = default;
};

/// Small configuration used by unit tests and gradient checks.
ModelConfig tiny_config();

std::string describe(const ModelConfig& c);

}  // namespace rrk
