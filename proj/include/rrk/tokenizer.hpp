#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "rrk/model_config.hpp"

namespace rrk {

/// Lowercases, splits on anything that is not an ASCII letter or digit, and
/// maps each word to reserved_count + fnv1a(word) mod (vocab - reserved).
/// Collisions are accepted.
class Tokenizer {
 public:
  explicit Tokenizer(const ModelConfig& config);

  static std::vector<std::string> split(std::string_view text);
  TokenId id_of(std::string_view word) const;
  std::vector<TokenId> encode(std::string_view text) const;

 private:
  std::uint32_t first_id_;
  std::uint32_t span_;
};

}  // namespace rrk
