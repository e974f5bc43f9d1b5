#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rrk/corpus.hpp"

namespace rrk {

struct Hit {
  std::string doc_id;
  double score = 0;
};

/// BM25 over tokenizer ids with idf = ln(1 + (N - df + 0.5) / (df + 0.5)).
class Bm25Index {
 public:
  Bm25Index(const std::vector<Document>& docs, const Tokenizer& tokenizer, double k1 = 0.9,
            double b = 0.4);

  /// Best first, ties by doc_id. Empty when no query term is indexed;
  /// otherwise min(top_n, N) documents, unmatched ones scoring 0.
  std::vector<Hit> retrieve(const std::string& query_text, std::size_t top_n) const;
  std::vector<Hit> retrieve_tokens(const std::vector<TokenId>& query, std::size_t top_n) const;

  std::size_t size() const { return doc_ids_.size(); }

 private:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };
  const Tokenizer& tokenizer_;
  double k1_, b_;
  double avg_len_ = 0;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_len_;
  std::unordered_map<TokenId, std::vector<Posting>> postings_;
};

}  // namespace rrk
