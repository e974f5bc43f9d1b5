#include "rrk/model_config.hpp"

#include <algorithm>
#include <sstream>

#include "rrk/error.hpp"

namespace rrk {

std::uint32_t ModelConfig::reserved_count() const {
  return std::max({pad_id, sep_id, mem_first + mem_tokens - 1}) + 1;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (d_model == 0 || n_heads == 0 || n_layers == 0 || d_ff == 0) fail("zero-sized dimension");
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if ((d_model / n_heads) % 2 != 0) fail("head width must be even for rotary encoding");
  if (mem_tokens < 1) fail("need at least one memory token");
  if (max_seq_len < 1) fail("max_seq_len must be positive");
  if (lora_rank < 1) fail("lora_rank must be positive");
  const std::uint32_t mem_last = mem_first + mem_tokens - 1;
  if (pad_id >= vocab_size || sep_id >= vocab_size || mem_last >= vocab_size) {
    fail("reserved ids must be below vocab_size");
  }
  if (pad_id == sep_id) fail("PAD and SEP must differ");
  for (std::uint32_t id : {pad_id, sep_id}) {
    if (id >= mem_first && id <= mem_last) fail("PAD/SEP overlap the memory-token range");
  }
  if (reserved_count() >= vocab_size) fail("vocabulary has no room for ordinary tokens");
}

void ModelConfig::validate_listwise(std::uint32_t max_query_len, std::uint32_t k) const {
  validate();
  const std::uint64_t need =
      2ULL * max_query_len + static_cast<std::uint64_t>(k) * (mem_tokens + 1ULL);
  if (need > max_seq_len) {
    throw ConfigError("model config: listwise input of 2*" + std::to_string(max_query_len) +
                      " + " + std::to_string(k) + "*(" + std::to_string(mem_tokens) +
                      "+1) = " + std::to_string(need) + " exceeds max_seq_len " +
                      std::to_string(max_seq_len));
  }
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 64;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_seq_len = 64;
  c.mem_tokens = 2;
  c.lora_rank = 2;
  c.lora_alpha = 4.0f;
  c.rng_seed = 7;
  return c;
}

std::string describe(const ModelConfig& c) {
  std::ostringstream out;
  out << "vocab=" << c.vocab_size << " d_model=" << c.d_model << " layers=" << c.n_layers
      << " heads=" << c.n_heads << " d_ff=" << c.d_ff << " max_seq_len=" << c.max_seq_len
      << " mem_tokens=" << c.mem_tokens;
  return out.str();
}

}  // namespace rrk
