#include "rrk/compressor.hpp"

namespace rrk {

std::vector<TokenId> truncate(const std::vector<TokenId>& tokens, std::size_t max_doc_len) {
  if (max_doc_len < 1) throw ContractError("max_doc_len must be at least 1");
  if (tokens.size() <= max_doc_len) return tokens;
  return {tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(max_doc_len)};
}

double compression_factor(std::size_t max_doc_len, std::size_t l) {
  if (l < 1) throw ContractError("need at least one memory token");
  return static_cast<double>(max_doc_len) / static_cast<double>(l);
}

std::vector<TokenId> compressor_input(const std::vector<TokenId>& tokens, const ModelConfig& config,
                                      std::size_t max_doc_len) {
  auto input = truncate(tokens, max_doc_len);
  for (std::uint32_t s = 0; s < config.mem_tokens; ++s) input.push_back(config.mem_id(s));
  return input;
}

template <typename T>
CompressedDoc<T> compress(Graph<T>& g, const Transformer<T>& model, const std::string& doc_id,
                          const std::vector<TokenId>& tokens, std::size_t max_doc_len) {
  if (doc_id.empty()) throw IdError("document id is empty");
  if (tokens.empty()) throw EmptyDocumentError("document " + doc_id + " has no tokens");
  const auto& config = model.config();
  const auto input = compressor_input(tokens, config, max_doc_len);
  Tensor<T> hidden = model.forward_tokens(g, input);
  CompressedDoc<T> out;
  out.doc_id = doc_id;
  out.embeddings = ad::slice_rows(g, hidden, input.size() - config.mem_tokens, config.mem_tokens);
  out.source_len = tokens.size();
  out.max_doc_len = max_doc_len;
  return out;
}

template <typename T>
CompressedDoc<T> compress(const Transformer<T>& model, const std::string& doc_id,
                          const std::vector<TokenId>& tokens, std::size_t max_doc_len) {
  Graph<T> g(false);
  auto out = compress(g, model, doc_id, tokens, max_doc_len);
  out.embeddings = out.embeddings.detach();
  return out;
}

#define RRK_INSTANTIATE_COMPRESS(T)                                                           \
  template CompressedDoc<T> compress(Graph<T>&, const Transformer<T>&, const std::string&, \
                                     const std::vector<TokenId>&, std::size_t);             \
  template CompressedDoc<T> compress(const Transformer<T>&, const std::string&,             \
                                     const std::vector<TokenId>&, std::size_t);

RRK_INSTANTIATE_COMPRESS(float)
RRK_INSTANTIATE_COMPRESS(double)

}  // namespace rrk
