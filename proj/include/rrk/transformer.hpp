#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rrk/model_config.hpp"
#include "rrk/ops.hpp"
#include "rrk/rng.hpp"
#include "rrk/tensor.hpp"

namespace rrk {

using ad::Graph;
using ad::Tensor;

/// Projections inside one decoder layer that may carry a low-rank adapter.
enum class Projection : std::size_t { Q = 0, K, V, O, FFUp, FFDown };
inline constexpr std::size_t kProjectionCount = 6;

const char* projection_name(Projection p);
/// Parses "q", "k", "v", "o", "ff_up", "ff_down" (and "ff" for both FF
/// projections); throws ConfigError otherwise.
std::vector<Projection> parse_projections(const std::string& csv);

/// Row `row` of `source` fed to the first layer in place of a token embedding.
template <typename T>
struct VectorItem {
  Tensor<T> source;
  std::size_t row = 0;
};

template <typename T>
using InputItem = std::variant<TokenId, VectorItem<T>>;

/// Trainable rank-r delta on a frozen weight: W + (alpha / r) * A * B.
template <typename T>
struct LowRankAdapter {
  Tensor<T> a;  // d_in x r
  Tensor<T> b;  // r x d_out, zero at attach time
  std::size_t rank = 0;
  T alpha = T(0);

  T scaling() const { return alpha / static_cast<T>(rank); }
};

template <typename T>
struct DecoderLayer {
  Tensor<T> attn_norm;
  Tensor<T> ffn_norm;
  std::array<Tensor<T>, kProjectionCount> proj;
  std::array<std::optional<LowRankAdapter<T>>, kProjectionCount> adapters;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

/// Pre-norm decoder-only transformer with rotary attention and SiLU MLP.
/// Inputs mix token ids with externally supplied d_model vectors; both kinds
/// get positions the same way.
template <typename T>
class Transformer {
 public:
  Transformer(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Final-layer hidden states [T x d_model].
  Tensor<T> forward(Graph<T>& g, const std::vector<InputItem<T>>& items) const;
  Tensor<T> forward_tokens(Graph<T>& g, const std::vector<TokenId>& tokens) const;

  /// Adds zero-initialized adapters to every layer for each target.
  /// Throws ContractError if a target already has one.
  void attach_adapters(const std::vector<Projection>& targets, std::size_t rank, T alpha,
                       std::uint64_t seed);
  /// Folds every adapter into its base weight and removes it.
  void merge_adapters();
  bool has_adapters() const;

  /// Base weights and adapter weights, with stable names.
  std::vector<NamedTensor<T>> base_parameters() const;
  std::vector<NamedTensor<T>> adapter_parameters() const;
  std::vector<NamedTensor<T>> named_parameters() const;

  /// Flags which groups receive gradients.
  void set_trainable(bool base, bool adapters);

  /// Deep copy with independent storage.
  Transformer clone() const;

  /// Element-type conversion (e.g. float weights into a double model for
  /// gradient checking).
  template <typename U>
  Transformer<U> cast() const;

  const Tensor<T>& embedding_table() const { return embed_; }
  std::vector<DecoderLayer<T>>& layers() { return layers_; }
  const std::vector<DecoderLayer<T>>& layers() const { return layers_; }

 private:
  template <typename U>
  friend class Transformer;

  Transformer() = default;

  Tensor<T> project(Graph<T>& g, const Tensor<T>& x, const DecoderLayer<T>& layer,
                    Projection p) const;

  ModelConfig config_;
  Tensor<T> embed_;
  std::vector<DecoderLayer<T>> layers_;
  Tensor<T> final_norm_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace rrk
