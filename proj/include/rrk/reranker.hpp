#pragma once

#include <string>
#include <vector>

#include "rrk/compressor.hpp"

namespace rrk {

inline constexpr double kDefaultTau = 0.125;

/// X = (q; c_1; SEP; ...; c_k; SEP; q).
template <typename T>
struct ListwiseInput {
  std::vector<InputItem<T>> items;
  std::vector<std::size_t> sep_positions;
  std::size_t final_position = 0;
  std::size_t k = 0;
};

/// 2|q| + k(l+1).
std::size_t listwise_length(std::size_t query_len, std::size_t k, std::size_t l);

/// Throws ContractError for k = 0 or an empty query, ConfigError when
/// candidates disagree on l or d_model, LengthError when X exceeds
/// max_seq_len.
template <typename T>
ListwiseInput<T> build_listwise_input(const ModelConfig& config,
                                      const std::vector<TokenId>& query_tokens,
                                      const std::vector<CompressedDoc<T>>& docs);

/// cos(H[final], H[sep_i]) for each candidate, as a [k] tensor.
template <typename T>
Tensor<T> score_listwise(Graph<T>& g, const Transformer<T>& model, const ListwiseInput<T>& input);

struct ScoredCandidates {
  std::vector<std::string> doc_ids;
  std::vector<double> scores;
};

/// Descending score, ties by doc_id ascending.
std::vector<std::string> rank(const ScoredCandidates& scored);
/// Same order, as indices into scored.
std::vector<std::size_t> rank_indices(const ScoredCandidates& scored);

/// (i, j) for every strict teacher preference t_i > t_j.
std::vector<ad::IndexPair> preference_pairs(const std::vector<double>& teacher_scores);

/// Linear map from the last hidden state to a scalar.
template <typename T>
struct PointwiseHead {
  Tensor<T> weight;  // d_model x 1
  Tensor<T> bias;    // 1

  static PointwiseHead zeros(std::size_t d_model);
};

/// (q; c; SEP).
template <typename T>
std::vector<InputItem<T>> pointwise_input(const ModelConfig& config,
                                          const std::vector<TokenId>& query_tokens,
                                          const CompressedDoc<T>& doc);

template <typename T>
Tensor<T> pointwise_score(Graph<T>& g, const Transformer<T>& model, const PointwiseHead<T>& head,
                          const std::vector<TokenId>& query_tokens, const CompressedDoc<T>& doc);

/// Pointwise over raw text: (q; d; SEP). Used as the uncompressed baseline.
template <typename T>
Tensor<T> pointwise_text_score(Graph<T>& g, const Transformer<T>& model, const PointwiseHead<T>& head,
                               const std::vector<TokenId>& query_tokens,
                               const std::vector<TokenId>& doc_tokens);

}  // namespace rrk
