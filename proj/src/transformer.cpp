#include "rrk/transformer.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

namespace rrk {
namespace {

template <typename T>
Tensor<T> random_tensor(ad::Shape shape, double stddev, Rng& rng) {
  std::vector<T> data(ad::numel(shape));
  for (auto& v : data) v = static_cast<T>(rng.normal() * stddev);
  return Tensor<T>::from_data(std::move(shape), std::move(data), true);
}

template <typename T>
Tensor<T> ones(std::size_t n) {
  return Tensor<T>::from_data({n}, std::vector<T>(n, T(1)), true);
}

template <typename T>
Tensor<T> copy_tensor(const Tensor<T>& t) {
  return Tensor<T>::from_data(t.shape(), std::vector<T>(t.data().begin(), t.data().end()),
                              t.requires_grad());
}

template <typename U, typename T>
Tensor<U> convert(const Tensor<T>& t) {
  std::vector<U> data(t.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<U>(t.data()[i]);
  return Tensor<U>::from_data(t.shape(), std::move(data), t.requires_grad());
}

std::pair<std::size_t, std::size_t> projection_dims(const ModelConfig& c, Projection p) {
  switch (p) {
    case Projection::FFUp:
      return {c.d_model, c.d_ff};
    case Projection::FFDown:
      return {c.d_ff, c.d_model};
    default:
      return {c.d_model, c.d_model};
  }
}

}  // namespace

const char* projection_name(Projection p) {
  switch (p) {
    case Projection::Q:
      return "wq";
    case Projection::K:
      return "wk";
    case Projection::V:
      return "wv";
    case Projection::O:
      return "wo";
    case Projection::FFUp:
      return "ff_up";
    case Projection::FFDown:
      return "ff_down";
  }
  return "?";
}

std::vector<Projection> parse_projections(const std::string& csv) {
  std::vector<Projection> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "q") out.push_back(Projection::Q);
    else if (item == "k") out.push_back(Projection::K);
    else if (item == "v") out.push_back(Projection::V);
    else if (item == "o") out.push_back(Projection::O);
    else if (item == "ff_up") out.push_back(Projection::FFUp);
    else if (item == "ff_down") out.push_back(Projection::FFDown);
    else if (item == "ff") {
      out.push_back(Projection::FFUp);
      out.push_back(Projection::FFDown);
    } else {
      throw ConfigError("unknown adapter target '" + item + "'");
    }
  }
  return out;
}

template <typename T>
Transformer<T>::Transformer(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  embed_ = random_tensor<T>({config_.vocab_size, d}, config_.embed_init_std, rng);
  layers_.resize(config_.n_layers);
  for (auto& layer : layers_) {
    layer.attn_norm = ones<T>(d);
    layer.ffn_norm = ones<T>(d);
    for (std::size_t p = 0; p < kProjectionCount; ++p) {
      const auto [din, dout] = projection_dims(config_, static_cast<Projection>(p));
      layer.proj[p] = random_tensor<T>({din, dout}, 1.0 / std::sqrt(static_cast<double>(din)), rng);
    }
  }
  final_norm_ = ones<T>(d);
}

template <typename T>
Tensor<T> Transformer<T>::project(Graph<T>& g, const Tensor<T>& x, const DecoderLayer<T>& layer,
                                  Projection p) const {
  const auto idx = static_cast<std::size_t>(p);
  Tensor<T> y = ad::matmul(g, x, layer.proj[idx]);
  if (const auto& adapter = layer.adapters[idx]) {
    Tensor<T> delta = ad::matmul(g, ad::matmul(g, x, adapter->a), adapter->b);
    y = ad::add(g, y, ad::scale(g, delta, adapter->scaling()));
  }
  return y;
}

template <typename T>
Tensor<T> Transformer<T>::forward(Graph<T>& g, const std::vector<InputItem<T>>& items) const {
  const std::size_t len = items.size();
  if (len == 0) throw ContractError("forward on an empty sequence");
  if (len > config_.max_seq_len) {
    throw LengthError("sequence length " + std::to_string(len) + " exceeds max_seq_len " +
                      std::to_string(config_.max_seq_len));
  }
  // Source 0 is the embedding table; each distinct injected tensor gets its own slot.
  std::vector<Tensor<T>> sources{embed_};
  std::vector<ad::RowPick> picks;
  picks.reserve(len);
  for (const auto& item : items) {
    if (const auto* tok = std::get_if<TokenId>(&item)) {
      if (*tok >= config_.vocab_size) {
        throw VocabError("token id " + std::to_string(*tok) + " outside vocabulary of " +
                         std::to_string(config_.vocab_size));
      }
      picks.push_back({0, *tok});
      continue;
    }
    const auto& vec = std::get<VectorItem<T>>(item);
    if (vec.source.cols() != config_.d_model) {
      throw DimensionError("injected vector width " + std::to_string(vec.source.cols()) +
                           " differs from d_model " + std::to_string(config_.d_model));
    }
    std::size_t slot = 0;
    for (std::size_t s = 1; s < sources.size(); ++s) {
      if (sources[s].node() == vec.source.node()) slot = s;
    }
    if (slot == 0) {
      slot = sources.size();
      sources.push_back(vec.source);
    }
    picks.push_back({slot, vec.row});
  }

  const T eps = static_cast<T>(config_.norm_eps);
  const T base = static_cast<T>(config_.rope_base);
  Tensor<T> x = ad::gather_rows(g, sources, picks);
  for (const auto& layer : layers_) {
    Tensor<T> h = ad::rms_norm(g, x, layer.attn_norm, eps);
    Tensor<T> q = ad::rotary(g, project(g, h, layer, Projection::Q), config_.n_heads, base);
    Tensor<T> k = ad::rotary(g, project(g, h, layer, Projection::K), config_.n_heads, base);
    Tensor<T> v = project(g, h, layer, Projection::V);
    Tensor<T> attn = ad::causal_attention(g, q, k, v, config_.n_heads);
    x = ad::add(g, x, project(g, attn, layer, Projection::O));
    Tensor<T> h2 = ad::rms_norm(g, x, layer.ffn_norm, eps);
    Tensor<T> up = ad::silu(g, project(g, h2, layer, Projection::FFUp));
    x = ad::add(g, x, project(g, up, layer, Projection::FFDown));
  }
  return ad::rms_norm(g, x, final_norm_, eps);
}

template <typename T>
Tensor<T> Transformer<T>::forward_tokens(Graph<T>& g, const std::vector<TokenId>& tokens) const {
  std::vector<InputItem<T>> items(tokens.begin(), tokens.end());
  return forward(g, items);
}

template <typename T>
void Transformer<T>::attach_adapters(const std::vector<Projection>& targets, std::size_t rank,
                                     T alpha, std::uint64_t seed) {
  if (rank < 1) throw ContractError("adapter rank must be at least 1");
  for (const auto& layer : layers_) {
    for (auto p : targets) {
      if (layer.adapters[static_cast<std::size_t>(p)]) {
        throw ContractError(std::string("duplicate adapter on ") + projection_name(p));
      }
    }
  }
  Rng rng(seed);
  for (auto& layer : layers_) {
    for (auto p : targets) {
      const auto [din, dout] = projection_dims(config_, p);
      LowRankAdapter<T> adapter;
      adapter.rank = rank;
      adapter.alpha = alpha;
      adapter.a = random_tensor<T>({din, rank}, 1.0 / std::sqrt(static_cast<double>(din)), rng);
      adapter.b = Tensor<T>::zeros({rank, dout}, true);
      layer.adapters[static_cast<std::size_t>(p)] = std::move(adapter);
    }
  }
}

template <typename T>
void Transformer<T>::merge_adapters() {
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (auto& layer : layers_) {
    for (std::size_t p = 0; p < kProjectionCount; ++p) {
      auto& adapter = layer.adapters[p];
      if (!adapter) continue;
      auto& w = layer.proj[p];
      const auto din = static_cast<Eigen::Index>(w.shape()[0]);
      const auto dout = static_cast<Eigen::Index>(w.shape()[1]);
      const auto r = static_cast<Eigen::Index>(adapter->rank);
      Eigen::Map<RowMat> wm(w.mutable_data().data(), din, dout);
      Eigen::Map<const RowMat> am(adapter->a.data().data(), din, r);
      Eigen::Map<const RowMat> bm(adapter->b.data().data(), r, dout);
      wm.noalias() += adapter->scaling() * (am * bm);
      adapter.reset();
    }
  }
}

template <typename T>
bool Transformer<T>::has_adapters() const {
  for (const auto& layer : layers_)
    for (const auto& a : layer.adapters)
      if (a) return true;
  return false;
}

template <typename T>
std::vector<NamedTensor<T>> Transformer<T>::base_parameters() const {
  std::vector<NamedTensor<T>> out{{"embed", embed_}};
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layers." + std::to_string(i) + ".";
    out.push_back({prefix + "attn_norm", layers_[i].attn_norm});
    for (std::size_t p = 0; p < kProjectionCount; ++p) {
      out.push_back({prefix + projection_name(static_cast<Projection>(p)), layers_[i].proj[p]});
    }
    out.push_back({prefix + "ffn_norm", layers_[i].ffn_norm});
  }
  out.push_back({"final_norm", final_norm_});
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Transformer<T>::adapter_parameters() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (std::size_t p = 0; p < kProjectionCount; ++p) {
      const auto& a = layers_[i].adapters[p];
      if (!a) continue;
      const std::string prefix = "layers." + std::to_string(i) + "." +
                                 projection_name(static_cast<Projection>(p)) + ".lora_";
      out.push_back({prefix + "a", a->a});
      out.push_back({prefix + "b", a->b});
    }
  }
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Transformer<T>::named_parameters() const {
  auto out = base_parameters();
  auto extra = adapter_parameters();
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

template <typename T>
void Transformer<T>::set_trainable(bool base, bool adapters) {
  for (auto& p : base_parameters()) p.tensor.set_requires_grad(base);
  for (auto& p : adapter_parameters()) p.tensor.set_requires_grad(adapters);
}

template <typename T>
Transformer<T> Transformer<T>::clone() const {
  return cast<T>();
}

template <typename T>
template <typename U>
Transformer<U> Transformer<T>::cast() const {
  Transformer<U> out;
  out.config_ = config_;
  out.embed_ = convert<U>(embed_);
  out.final_norm_ = convert<U>(final_norm_);
  out.layers_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& src = layers_[i];
    auto& dst = out.layers_[i];
    dst.attn_norm = convert<U>(src.attn_norm);
    dst.ffn_norm = convert<U>(src.ffn_norm);
    for (std::size_t p = 0; p < kProjectionCount; ++p) {
      dst.proj[p] = convert<U>(src.proj[p]);
      if (src.adapters[p]) {
        LowRankAdapter<U> a;
        a.a = convert<U>(src.adapters[p]->a);
        a.b = convert<U>(src.adapters[p]->b);
        a.rank = src.adapters[p]->rank;
        a.alpha = static_cast<U>(src.adapters[p]->alpha);
        dst.adapters[p] = std::move(a);
      }
    }
  }
  return out;
}

template class Transformer<float>;
template class Transformer<double>;
template Transformer<double> Transformer<float>::cast<double>() const;
template Transformer<float> Transformer<double>::cast<float>() const;

}  // namespace rrk
