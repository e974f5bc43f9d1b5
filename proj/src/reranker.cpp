#include "rrk/reranker.hpp"

#include <algorithm>
#include <numeric>

namespace rrk {

std::size_t listwise_length(std::size_t query_len, std::size_t k, std::size_t l) {
  return 2 * query_len + k * (l + 1);
}

template <typename T>
ListwiseInput<T> build_listwise_input(const ModelConfig& config,
                                      const std::vector<TokenId>& query_tokens,
                                      const std::vector<CompressedDoc<T>>& docs) {
  if (docs.empty()) throw ContractError("listwise input needs at least one candidate");
  if (query_tokens.empty()) throw ContractError("listwise input needs a non-empty query");
  const std::size_t l = docs.front().embeddings.rows();
  for (const auto& d : docs) {
    if (d.embeddings.rank() != 2 || d.embeddings.rows() != l) {
      throw ConfigError("candidate " + d.doc_id + " has " + std::to_string(d.embeddings.rows()) +
                        " memory embeddings, expected " + std::to_string(l));
    }
    if (d.embeddings.cols() != config.d_model) {
      throw ConfigError("candidate " + d.doc_id + " has width " +
                        std::to_string(d.embeddings.cols()) + ", model expects " +
                        std::to_string(config.d_model));
    }
  }
  const std::size_t q = query_tokens.size(), k = docs.size();
  const std::size_t len = listwise_length(q, k, l);
  if (len > config.max_seq_len) {
    throw LengthError("listwise input 2*" + std::to_string(q) + " + " + std::to_string(k) + "*(" +
                      std::to_string(l) + "+1) = " + std::to_string(len) +
                      " exceeds max_seq_len " + std::to_string(config.max_seq_len));
  }
  ListwiseInput<T> x;
  x.k = k;
  x.items.reserve(len);
  x.sep_positions.reserve(k);
  for (auto t : query_tokens) x.items.emplace_back(t);
  for (const auto& d : docs) {
    for (std::size_t s = 0; s < l; ++s) x.items.emplace_back(VectorItem<T>{d.embeddings, s});
    x.sep_positions.push_back(x.items.size());
    x.items.emplace_back(TokenId{config.sep_id});
  }
  for (auto t : query_tokens) x.items.emplace_back(t);
  x.final_position = x.items.size() - 1;
  return x;
}

template <typename T>
Tensor<T> score_listwise(Graph<T>& g, const Transformer<T>& model, const ListwiseInput<T>& input) {
  Tensor<T> hidden = model.forward(g, input.items);
  Tensor<T> q = ad::row(g, hidden, input.final_position);
  std::vector<Tensor<T>> scores;
  scores.reserve(input.k);
  for (auto pos : input.sep_positions) scores.push_back(ad::cosine(g, q, ad::row(g, hidden, pos)));
  return ad::stack(g, scores);
}

std::vector<std::size_t> rank_indices(const ScoredCandidates& scored) {
  if (scored.doc_ids.size() != scored.scores.size()) {
    throw ContractError("scored candidates: " + std::to_string(scored.doc_ids.size()) + " ids, " +
                        std::to_string(scored.scores.size()) + " scores");
  }
  std::vector<std::size_t> order(scored.doc_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored.scores[a] != scored.scores[b]) return scored.scores[a] > scored.scores[b];
    return scored.doc_ids[a] < scored.doc_ids[b];
  });
  return order;
}

std::vector<std::string> rank(const ScoredCandidates& scored) {
  std::vector<std::string> out;
  for (auto i : rank_indices(scored)) out.push_back(scored.doc_ids[i]);
  return out;
}

std::vector<ad::IndexPair> preference_pairs(const std::vector<double>& teacher_scores) {
  std::vector<ad::IndexPair> pairs;
  for (std::size_t i = 0; i < teacher_scores.size(); ++i)
    for (std::size_t j = 0; j < teacher_scores.size(); ++j)
      if (teacher_scores[i] > teacher_scores[j]) pairs.emplace_back(i, j);
  return pairs;
}

template <typename T>
PointwiseHead<T> PointwiseHead<T>::zeros(std::size_t d_model) {
  return {Tensor<T>::zeros({d_model, 1}, true), Tensor<T>::zeros({1}, true)};
}

template <typename T>
std::vector<InputItem<T>> pointwise_input(const ModelConfig& config,
                                          const std::vector<TokenId>& query_tokens,
                                          const CompressedDoc<T>& doc) {
  std::vector<InputItem<T>> items(query_tokens.begin(), query_tokens.end());
  for (std::size_t s = 0; s < doc.embeddings.rows(); ++s)
    items.emplace_back(VectorItem<T>{doc.embeddings, s});
  items.emplace_back(TokenId{config.sep_id});
  return items;
}

namespace {

template <typename T>
Tensor<T> apply_head(Graph<T>& g, const Tensor<T>& hidden, const PointwiseHead<T>& head) {
  Tensor<T> last = ad::slice_rows(g, hidden, hidden.rows() - 1, 1);
  Tensor<T> out = ad::add_bias(g, ad::matmul(g, last, head.weight), head.bias);
  return ad::reshape(g, out, {});
}

}  // namespace

template <typename T>
Tensor<T> pointwise_score(Graph<T>& g, const Transformer<T>& model, const PointwiseHead<T>& head,
                          const std::vector<TokenId>& query_tokens, const CompressedDoc<T>& doc) {
  return apply_head(g, model.forward(g, pointwise_input(model.config(), query_tokens, doc)), head);
}

template <typename T>
Tensor<T> pointwise_text_score(Graph<T>& g, const Transformer<T>& model, const PointwiseHead<T>& head,
                               const std::vector<TokenId>& query_tokens,
                               const std::vector<TokenId>& doc_tokens) {
  std::vector<TokenId> input = query_tokens;
  input.insert(input.end(), doc_tokens.begin(), doc_tokens.end());
  input.push_back(model.config().sep_id);
  return apply_head(g, model.forward_tokens(g, input), head);
}

#define RRK_INSTANTIATE_RERANKER(T)                                                             \
  template ListwiseInput<T> build_listwise_input(const ModelConfig&, const std::vector<TokenId>&, \
                                                 const std::vector<CompressedDoc<T>>&);          \
  template Tensor<T> score_listwise(Graph<T>&, const Transformer<T>&, const ListwiseInput<T>&);  \
  template struct PointwiseHead<T>;                                                              \
  template std::vector<InputItem<T>> pointwise_input(const ModelConfig&,                         \
                                                     const std::vector<TokenId>&,                \
                                                     const CompressedDoc<T>&);                   \
  template Tensor<T> pointwise_score(Graph<T>&, const Transformer<T>&, const PointwiseHead<T>&,  \
                                     const std::vector<TokenId>&, const CompressedDoc<T>&);      \
  template Tensor<T> pointwise_text_score(Graph<T>&, const Transformer<T>&,                      \
                                          const PointwiseHead<T>&, const std::vector<TokenId>&,  \
                                          const std::vector<TokenId>&);

RRK_INSTANTIATE_RERANKER(float)
RRK_INSTANTIATE_RERANKER(double)

}  // namespace rrk
