#include "rrk/tokenizer.hpp"

#include "rrk/rng.hpp"

namespace rrk {

Tokenizer::Tokenizer(const ModelConfig& config)
    : first_id_(config.reserved_count()), span_(config.vocab_size - config.reserved_count()) {
  config.validate();
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (alnum) {
      cur.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TokenId Tokenizer::id_of(std::string_view word) const {
  return first_id_ + static_cast<TokenId>(fnv1a(word) % span_);
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split(text)) ids.push_back(id_of(w));
  return ids;
}

}  // namespace rrk
