#pragma once

#include <string>
#include <vector>

#include "rrk/transformer.hpp"

namespace rrk {

/// A document's l memory-token embeddings (l x d_model).
template <typename T>
struct CompressedDoc {
  std::string doc_id;
  Tensor<T> embeddings;
  std::size_t source_len = 0;
  std::size_t max_doc_len = 0;
};

/// Head-keep truncation.
std::vector<TokenId> truncate(const std::vector<TokenId>& tokens, std::size_t max_doc_len);

double compression_factor(std::size_t max_doc_len, std::size_t l);

/// truncate(tokens) followed by MEM_1..MEM_l.
std::vector<TokenId> compressor_input(const std::vector<TokenId>& tokens, const ModelConfig& config,
                                      std::size_t max_doc_len);

/// Final hidden states at the memory positions, in slot order. Recorded in g,
/// so gradients reach the compressor when g is enabled.
template <typename T>
CompressedDoc<T> compress(Graph<T>& g, const Transformer<T>& model, const std::string& doc_id,
                          const std::vector<TokenId>& tokens, std::size_t max_doc_len);

/// Inference-only convenience; result has no history.
template <typename T>
CompressedDoc<T> compress(const Transformer<T>& model, const std::string& doc_id,
                          const std::vector<TokenId>& tokens, std::size_t max_doc_len);

}  // namespace rrk
