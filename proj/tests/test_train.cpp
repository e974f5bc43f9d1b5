#include <gtest/gtest.h>

#include <cmath>

#include "rrk/checkpoint.hpp"
#include "rrk/optim.hpp"
#include "rrk/train.hpp"

using namespace rrk;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 256;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_seq_len = 128;
  c.mem_tokens = 2;
  c.lora_rank = 4;
  c.lora_alpha = 8.0f;
  return c;
}

struct ToySet {
  TokenStore data;
  std::vector<TrainingExample> examples;
};

ToySet toy_set(std::size_t n_examples, std::size_t n_docs, std::uint64_t seed) {
  Rng rng(seed);
  ToySet s;
  for (int d = 0; d < 40; ++d) {
    std::vector<TokenId> t;
    for (int i = 0; i < 6; ++i) t.push_back(static_cast<TokenId>(20 + rng.uniform_index(200)));
    s.data.docs["d" + std::to_string(d)] = t;
  }
  for (std::size_t q = 0; q < n_examples; ++q) {
    const std::string qid = "q" + std::to_string(q);
    s.data.queries[qid] = {static_cast<TokenId>(20 + rng.uniform_index(200)), static_cast<TokenId>(20 + q)};
    TrainingExample ex{qid, {}, {}};
    for (auto i : rng.sample_without_replacement(40, n_docs)) {
      ex.docs.push_back("d" + std::to_string(i));
      ex.teacher_scores.push_back(rng.uniform01() * 3);
    }
    s.examples.push_back(ex);
  }
  return s;
}

ModelPair<float> scratch_pair(const ModelConfig& c, std::uint64_t seed = 1) {
  return ModelPair<float>::create(c, {CompressorMode::FromScratch, seed, std::nullopt, {Projection::Q, Projection::V}});
}

std::string weights(const ModelPair<float>& p) { return encode_checkpoint(p.to_checkpoint()); }

double mean_loss(const ModelPair<float>& pair, const ToySet& s, const TrainOptions& o) {
  double total = 0;
  for (const auto& ex : s.examples) {
    Graph<float> g(false);
    total += example_loss(g, pair, ex, s.data, o).item();
  }
  return total / static_cast<double>(s.examples.size());
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("rrk_train_" + name + "_" + std::to_string(::getpid()));
}

}  // namespace

TEST(Train, ZeroLearningRateIsNoOp) {
  auto c = small_config();
  auto s = toy_set(8, 4, 3);
  auto pair = scratch_pair(c);
  pair.step = 0;
  const auto before = pair.to_checkpoint();
  TrainOptions o;
  o.lr = 0;
  o.epochs = 1;
  train(pair, s.examples, s.data, o);
  const auto after = pair.to_checkpoint();
  ASSERT_EQ(before.params.size(), after.params.size());
  for (std::size_t i = 0; i < before.params.size(); ++i) {
    if (before.params[i].name == "train.step") continue;
    EXPECT_EQ(before.params[i].values, after.params[i].values) << before.params[i].name;
  }
  EXPECT_EQ(pair.step, 2u);
}

TEST(Train, OverfitsSmallListwiseSet) {
  auto c = small_config();
  auto s = toy_set(32, 4, 5);
  auto pair = scratch_pair(c, 2);
  TrainOptions o;
  o.lr = 3e-3;
  o.grad_accum = 1;
  o.epochs = 1000;
  o.max_steps = 300;
  const double initial = mean_loss(pair, s, o);
  train(pair, s.examples, s.data, o);
  const double final = mean_loss(pair, s, o);
  EXPECT_LT(final, 0.25 * initial) << initial << " -> " << final;
}

TEST(Train, PointwiseMseDecreases) {
  auto c = small_config();
  auto s = toy_set(32, 4, 6);
  auto pair = scratch_pair(c, 3);
  TrainOptions o;
  o.loss = LossMode::Pointwise;
  o.lr = 3e-3;
  o.grad_accum = 1;
  o.epochs = 1000;
  o.max_steps = 200;
  const double initial = mean_loss(pair, s, o);
  const auto log = train(pair, s.examples, s.data, o);
  EXPECT_LT(mean_loss(pair, s, o), initial);
  EXPECT_EQ(log.size(), 200u);
}

TEST(Train, FrozenCompressorUnchangedWithZeroGradients) {
  auto c = small_config();
  auto s = toy_set(8, 4, 7);
  const auto ck = temp_path("frozen.ckpt");
  save_checkpoint(ck, scratch_pair(c, 4).to_checkpoint());
  auto pair = ModelPair<float>::create(c, {CompressorMode::Frozen, 5, ck, {}});
  const auto before = pair.compressor_parameters();
  std::vector<std::vector<float>> copy;
  for (const auto& p : before) copy.emplace_back(p.tensor.data().begin(), p.tensor.data().end());

  Graph<float> g;
  g.backward(example_loss(g, pair, s.examples[0], s.data, TrainOptions{}));
  for (const auto& p : pair.compressor_parameters()) {
    if (!p.tensor.has_grad()) continue;
    for (float v : p.tensor.grad()) ASSERT_EQ(v, 0.0f) << p.name;
  }
  TrainOptions o;
  o.epochs = 1;
  train(pair, s.examples, s.data, o);
  const auto after = pair.compressor_parameters();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_EQ(copy[i], std::vector<float>(after[i].tensor.data().begin(), after[i].tensor.data().end()));
  }
  fs::remove(ck);
}

TEST(Train, FinetuneReachesCompressorAdapters) {
  auto c = small_config();
  auto s = toy_set(4, 4, 8);
  const auto ck = temp_path("finetune.ckpt");
  save_checkpoint(ck, scratch_pair(c, 4).to_checkpoint());
  auto pair = ModelPair<float>::create(c, {CompressorMode::Finetune, 5, ck, {Projection::Q, Projection::V}});
  ASSERT_TRUE(pair.compressor.has_adapters());
  Graph<float> g;
  g.backward(example_loss(g, pair, s.examples[0], s.data, TrainOptions{}));
  double norm = 0;
  for (const auto& p : pair.compressor.adapter_parameters())
    if (p.tensor.has_grad())
      for (float v : p.tensor.grad()) norm += static_cast<double>(v) * v;
  EXPECT_GT(norm, 0.0);
  for (const auto& p : pair.compressor.base_parameters()) EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
  EXPECT_THROW(ModelPair<float>::create(c, {CompressorMode::Finetune, 5, std::nullopt, {}}), MissingCheckpointError);
  fs::remove(ck);
}

TEST(Train, PretrainedPairStartsBothModels) {
  auto c = small_config();
  const auto ck = temp_path("pretrained.ckpt");
  const auto source = scratch_pair(c, 4);
  save_checkpoint(ck, source.to_checkpoint());
  for (auto mode : {CompressorMode::Frozen, CompressorMode::Finetune}) {
    auto pair = ModelPair<float>::create(c, {mode, 5, ck, {Projection::Q}});
    const auto want = source.reranker.named_parameters();
    const auto got = pair.reranker.named_parameters();
    ASSERT_EQ(want.size(), got.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      EXPECT_EQ(std::vector<float>(want[i].tensor.data().begin(), want[i].tensor.data().end()),
                std::vector<float>(got[i].tensor.data().begin(), got[i].tensor.data().end()))
          << want[i].name;
      EXPECT_TRUE(got[i].tensor.requires_grad()) << got[i].name;
    }
  }
  // from scratch ignores the checkpoint
  auto fresh = ModelPair<float>::create(c, {CompressorMode::FromScratch, 5, ck, {}});
  EXPECT_NE(weights(fresh), weights(source));
  fs::remove(ck);
}

TEST(Train, DeterministicAndResumable) {
  auto c = small_config();
  auto s = toy_set(8, 4, 9);
  TrainOptions o;
  o.epochs = 1;
  o.seed = 11;
  auto a = scratch_pair(c, 6), b = scratch_pair(c, 6);
  const auto la = train(a, s.examples, s.data, o), lb = train(b, s.examples, s.data, o);
  EXPECT_EQ(weights(a), weights(b));
  EXPECT_EQ(format_loss_csv(la), format_loss_csv(lb));
  auto resumed = ModelPair<float>::from_checkpoint(decode_checkpoint(weights(a)));
  EXPECT_EQ(resumed.step, 2u);
  const auto more = train(resumed, s.examples, s.data, o);
  EXPECT_EQ(more.front().step, 3u);
  EXPECT_EQ(format_loss_csv(la).substr(0, 10), "step,loss\n");
}

TEST(Train, NonFiniteLossNamesStepAndQuery) {
  auto c = small_config();
  auto s = toy_set(4, 4, 10);
  auto pair = scratch_pair(c, 7);
  pair.reranker.layers()[0].proj[0].mutable_data()[0] = std::nanf("");
  TrainOptions o;
  o.epochs = 1;
  try {
    train(pair, s.examples, s.data, o);
    FAIL();
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("q"), std::string::npos) << msg;
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto p = Tensor<float>::from_data({3}, {1, 2, 3}, true);
  Adam<float> adam({p});
  adam.step(0.1);
  EXPECT_EQ(std::vector<float>(p.data().begin(), p.data().end()), (std::vector<float>{1, 2, 3}));
}
