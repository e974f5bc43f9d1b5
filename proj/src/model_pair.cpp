#include "rrk/model_pair.hpp"

#include <set>

namespace rrk {
namespace {

template <typename T>
Tensor<T> blob_tensor(const ParamBlob& b, bool requires_grad) {
  return Tensor<T>::from_data(b.shape, std::vector<T>(b.values.begin(), b.values.end()),
                              requires_grad);
}

std::optional<Projection> projection_from_name(std::string_view name) {
  for (std::size_t p = 0; p < kProjectionCount; ++p)
    if (name == projection_name(static_cast<Projection>(p))) return static_cast<Projection>(p);
  return std::nullopt;
}

template <typename T>
void copy_into(Tensor<T>& dst, const ParamBlob& b) {
  if (b.shape != dst.shape()) {
    throw CorruptionError("checkpoint blob " + b.name + " has shape " + ad::to_string(b.shape) +
                          ", model expects " + ad::to_string(dst.shape()));
  }
  auto out = dst.mutable_data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<T>(b.values[i]);
}

}  // namespace

CompressorMode parse_compressor_mode(const std::string& s) {
  if (s == "frozen" || s == "frozen_compressor") return CompressorMode::Frozen;
  if (s == "scratch" || s == "from_scratch") return CompressorMode::FromScratch;
  if (s == "finetune") return CompressorMode::Finetune;
  throw ConfigError("unknown compressor mode '" + s + "' (frozen|scratch|finetune)");
}

const char* compressor_mode_name(CompressorMode m) {
  switch (m) {
    case CompressorMode::Frozen:
      return "frozen";
    case CompressorMode::FromScratch:
      return "scratch";
    case CompressorMode::Finetune:
      return "finetune";
  }
  return "?";
}

template <typename T>
void load_transformer(Transformer<T>& model, const CheckpointData& ckpt, const std::string& prefix) {
  if (model.has_adapters()) throw ContractError("load_transformer into a model with adapters");
  // Adapter targets and rank are recovered from the blob names and shapes.
  std::set<std::size_t> targets;
  std::size_t rank = 0;
  for (const auto* b : ckpt.with_prefix(prefix + "layers.0.")) {
    const std::string_view rest = std::string_view(b->name).substr(prefix.size() + 9);
    const auto dot = rest.find(".lora_a");
    if (dot == std::string_view::npos) continue;
    auto p = projection_from_name(rest.substr(0, dot));
    if (!p || b->shape.size() != 2) throw CorruptionError("bad adapter blob " + b->name);
    targets.insert(static_cast<std::size_t>(*p));
    rank = b->shape[1];
  }
  if (!targets.empty()) {
    std::vector<Projection> list;
    for (auto t : targets) list.push_back(static_cast<Projection>(t));
    model.attach_adapters(list, rank, static_cast<T>(ckpt.config.lora_alpha), 0);
  }
  for (auto& p : model.named_parameters()) {
    const auto* b = ckpt.find(prefix + p.name);
    if (!b) throw CorruptionError("checkpoint lacks " + prefix + p.name);
    copy_into(p.tensor, *b);
  }
}

template <typename T>
void append_blobs(CheckpointData& ckpt, const std::string& prefix,
                  const std::vector<NamedTensor<T>>& params) {
  for (const auto& p : params) {
    ckpt.params.push_back({prefix + p.name, p.tensor.shape(),
                           std::vector<float>(p.tensor.data().begin(), p.tensor.data().end())});
  }
}

template <typename T>
ModelPair<T> ModelPair<T>::create(const ModelConfig& config, const ModelPairOptions& options) {
  config.validate();
  ModelPair pair{Transformer<T>(config, mix64(options.seed ^ 0xc0)),
                 Transformer<T>(config, mix64(options.seed ^ 0x5e)),
                 PointwiseHead<T>::zeros(config.d_model), options.mode, 0};
  if (options.mode == CompressorMode::Finetune && !options.compressor_checkpoint) {
    throw MissingCheckpointError("finetune mode needs a compressor checkpoint");
  }
  if (options.mode != CompressorMode::FromScratch && options.compressor_checkpoint) {
    const auto ckpt = load_checkpoint(*options.compressor_checkpoint);
    if (!(ckpt.config == config)) {
      throw ConfigError("compressor checkpoint config (" + describe(ckpt.config) +
                        ") differs from run config (" + describe(config) + ")");
    }
    Transformer<T> loaded(config, 0);
    load_transformer(loaded, ckpt, "compressor.");
    loaded.merge_adapters();
    pair.compressor = std::move(loaded);
    // a pretrained pair also carries its decoder
    if (!ckpt.with_prefix("reranker.").empty()) {
      Transformer<T> rr(config, 0);
      load_transformer(rr, ckpt, "reranker.");
      rr.merge_adapters();
      pair.reranker = std::move(rr);
      if (const auto* w = ckpt.find("head.weight")) copy_into(pair.head.weight, *w);
      if (const auto* b = ckpt.find("head.bias")) copy_into(pair.head.bias, *b);
    }
  }
  switch (options.mode) {
    case CompressorMode::Frozen:
      pair.compressor.set_trainable(false, false);
      break;
    case CompressorMode::FromScratch:
      pair.compressor.set_trainable(true, true);
      break;
    case CompressorMode::Finetune:
      pair.compressor.attach_adapters(options.adapter_targets, config.lora_rank,
                                      static_cast<T>(config.lora_alpha), mix64(options.seed ^ 0xad));
      pair.compressor.set_trainable(false, true);
      break;
  }
  pair.reranker.set_trainable(true, true);
  return pair;
}

template <typename T>
ModelPair<T> ModelPair<T>::from_checkpoint(const CheckpointData& ckpt) {
  ckpt.config.validate();
  ModelPair pair{Transformer<T>(ckpt.config, 0), Transformer<T>(ckpt.config, 0),
                 PointwiseHead<T>::zeros(ckpt.config.d_model), CompressorMode::FromScratch, 0};
  load_transformer(pair.compressor, ckpt, "compressor.");
  load_transformer(pair.reranker, ckpt, "reranker.");
  const auto* w = ckpt.find("head.weight");
  const auto* b = ckpt.find("head.bias");
  if (!w || !b) throw CorruptionError("checkpoint lacks the pointwise head");
  copy_into(pair.head.weight, *w);
  copy_into(pair.head.bias, *b);
  if (const auto* s = ckpt.find("train.step"); s && s->values.size() == 2) {
    pair.step = static_cast<std::uint64_t>(s->values[0]) +
                (static_cast<std::uint64_t>(s->values[1]) << 24);
  }
  if (const auto* m = ckpt.find("train.mode"); m && m->values.size() == 1) {
    pair.mode = static_cast<CompressorMode>(static_cast<int>(m->values[0]));
  }
  switch (pair.mode) {
    case CompressorMode::Frozen:
      pair.compressor.set_trainable(false, false);
      break;
    case CompressorMode::FromScratch:
      pair.compressor.set_trainable(true, true);
      break;
    case CompressorMode::Finetune:
      pair.compressor.set_trainable(false, true);
      break;
  }
  return pair;
}

template <typename T>
std::vector<Tensor<T>> ModelPair<T>::trainable_parameters(bool include_head) const {
  std::vector<Tensor<T>> out;
  for (const auto* model : {&compressor, &reranker})
    for (auto& p : model->named_parameters())
      if (p.tensor.requires_grad()) out.push_back(p.tensor);
  if (include_head) {
    out.push_back(head.weight);
    out.push_back(head.bias);
  }
  return out;
}

template <typename T>
CheckpointData ModelPair<T>::to_checkpoint() const {
  CheckpointData ckpt;
  ckpt.config = config();
  append_blobs(ckpt, "compressor.", compressor.named_parameters());
  append_blobs(ckpt, "reranker.", reranker.named_parameters());
  append_blobs<T>(ckpt, "head.", {{"weight", head.weight}, {"bias", head.bias}});
  // Step split into two exactly representable 24-bit halves.
  ckpt.params.push_back({"train.step", {2},
                         {static_cast<float>(step & 0xffffff), static_cast<float>(step >> 24)}});
  ckpt.params.push_back({"train.mode", {1}, {static_cast<float>(static_cast<int>(mode))}});
  return ckpt;
}

template <typename T>
template <typename U>
ModelPair<U> ModelPair<T>::cast() const {
  auto convert = [](const Tensor<T>& t) {
    return Tensor<U>::from_data(t.shape(), std::vector<U>(t.data().begin(), t.data().end()),
                                t.requires_grad());
  };
  return ModelPair<U>{compressor.template cast<U>(), reranker.template cast<U>(),
                      PointwiseHead<U>{convert(head.weight), convert(head.bias)}, mode, step};
}

template struct ModelPair<float>;
template struct ModelPair<double>;
template ModelPair<double> ModelPair<float>::cast<double>() const;
template void load_transformer(Transformer<float>&, const CheckpointData&, const std::string&);
template void load_transformer(Transformer<double>&, const CheckpointData&, const std::string&);
template void append_blobs(CheckpointData&, const std::string&, const std::vector<NamedTensor<float>>&);
template void append_blobs(CheckpointData&, const std::string&, const std::vector<NamedTensor<double>>&);

}  // namespace rrk
