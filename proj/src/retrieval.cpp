#include "rrk/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace rrk {

Bm25Index::Bm25Index(const std::vector<Document>& docs, const Tokenizer& tokenizer, double k1, double b)
    : tokenizer_(tokenizer), k1_(k1), b_(b) {
  double total = 0;
  for (std::uint32_t i = 0; i < docs.size(); ++i) {
    const auto ids = tokenizer.encode(docs[i].text);
    std::map<TokenId, std::uint32_t> tf;
    for (auto t : ids) ++tf[t];
    for (auto [t, n] : tf) postings_[t].push_back({i, n});
    doc_ids_.push_back(docs[i].id);
    doc_len_.push_back(static_cast<std::uint32_t>(ids.size()));
    total += static_cast<double>(ids.size());
  }
  avg_len_ = docs.empty() ? 0 : total / static_cast<double>(docs.size());
}

std::vector<Hit> Bm25Index::retrieve(const std::string& query_text, std::size_t top_n) const {
  return retrieve_tokens(tokenizer_.encode(query_text), top_n);
}

std::vector<Hit> Bm25Index::retrieve_tokens(const std::vector<TokenId>& query, std::size_t top_n) const {
  if (top_n < 1) throw ContractError("top_n must be at least 1");
  const std::set<TokenId> terms(query.begin(), query.end());
  std::vector<double> score(doc_ids_.size(), 0.0);
  const double n = static_cast<double>(doc_ids_.size());
  bool any = false;
  for (auto t : terms) {
    auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    any = true;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double norm = k1_ * (1.0 - b_ + b_ * doc_len_[p.doc] / avg_len_);
      score[p.doc] += idf * tf * (k1_ + 1.0) / (tf + norm);
    }
  }
  if (!any) return {};
  std::vector<std::uint32_t> order(doc_ids_.size());
  std::iota(order.begin(), order.end(), 0);
  const auto keep = std::min(top_n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      if (score[a] != score[b]) return score[a] > score[b];
                      return doc_ids_[a] < doc_ids_[b];
                    });
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < keep; ++i) hits.push_back({doc_ids_[order[i]], score[order[i]]});
  return hits;
}

}  // namespace rrk
