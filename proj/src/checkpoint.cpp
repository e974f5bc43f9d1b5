#include "rrk/checkpoint.hpp"

#include "rrk/binio.hpp"
#include "rrk/fileio.hpp"

namespace rrk {
namespace {

constexpr std::string_view kMagic = "RRKCKPT1";

ModelConfig decode_config(bin::Reader& r) {
  ModelConfig c;
  c.vocab_size = r.u32();
  c.d_model = r.u32();
  c.n_layers = r.u32();
  c.n_heads = r.u32();
  c.d_ff = r.u32();
  c.max_seq_len = r.u32();
  c.mem_tokens = r.u32();
  c.pad_id = r.u32();
  c.sep_id = r.u32();
  c.mem_first = r.u32();
  c.lora_rank = r.u32();
  c.lora_alpha = r.f32();
  c.rope_base = r.f32();
  c.norm_eps = r.f32();
  c.embed_init_std = r.f32();
  c.rng_seed = r.u64();
  return c;
}

}  // namespace

void encode_config(std::string& out, const ModelConfig& c) {
  for (auto v : {c.vocab_size, c.d_model, c.n_layers, c.n_heads, c.d_ff, c.max_seq_len,
                 c.mem_tokens, c.pad_id, c.sep_id, c.mem_first, c.lora_rank}) {
    bin::put_u32(out, v);
  }
  for (auto v : {c.lora_alpha, c.rope_base, c.norm_eps, c.embed_init_std}) bin::put_f32(out, v);
  bin::put_u64(out, c.rng_seed);
}

const ParamBlob* CheckpointData::find(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

std::vector<const ParamBlob*> CheckpointData::with_prefix(std::string_view prefix) const {
  std::vector<const ParamBlob*> out;
  for (const auto& p : params)
    if (std::string_view(p.name).starts_with(prefix)) out.push_back(&p);
  return out;
}

std::string encode_checkpoint(const CheckpointData& ckpt) {
  std::string out(kMagic);
  bin::put_u32(out, kCheckpointVersion);
  encode_config(out, ckpt.config);
  bin::put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    if (ad::numel(p.shape) != p.values.size()) {
      throw DimensionError("checkpoint blob " + p.name + " has " + std::to_string(p.values.size()) +
                           " values for shape " + ad::to_string(p.shape));
    }
    bin::put_str(out, p.name);
    bin::put_u32(out, static_cast<std::uint32_t>(p.shape.size()));
    for (auto d : p.shape) bin::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : p.values) bin::put_f32(out, v);
  }
  return out;
}

CheckpointData decode_checkpoint(std::string_view bytes) {
  bin::Reader r(bytes, "checkpoint");
  if (r.take(kMagic.size()) != kMagic) r.fail("bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  CheckpointData ckpt;
  ckpt.config = decode_config(r);
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamBlob p;
    p.name = r.str();
    const auto ndim = r.u32();
    if (ndim > 8) r.fail("blob " + p.name + " claims " + std::to_string(ndim) + " dimensions");
    for (std::uint32_t d = 0; d < ndim; ++d) p.shape.push_back(r.u32());
    const auto n = ad::numel(p.shape);
    if (n * 4 > r.remaining()) r.fail("truncated blob " + p.name);
    p.values.resize(n);
    for (auto& v : p.values) v = r.f32();
    ckpt.params.push_back(std::move(p));
  }
  if (!r.done()) r.fail("trailing bytes after last blob");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointData& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingCheckpointError("no checkpoint at " + path.string());
  return decode_checkpoint(read_file(path));
}

}  // namespace rrk
