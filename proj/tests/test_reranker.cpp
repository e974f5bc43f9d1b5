#include <gtest/gtest.h>

#include <cmath>

#include "rrk/model_pair.hpp"
#include "rrk/reranker.hpp"

using namespace rrk;

namespace {

std::vector<float> values(const Tensor<float>& t) { return {t.data().begin(), t.data().end()}; }

CompressedDoc<float> random_doc(const std::string& id, std::size_t l, std::size_t d, Rng& rng) {
  std::vector<float> v(l * d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return {id, Tensor<float>::from_data({l, d}, std::move(v)), 5, 128};
}

}  // namespace

TEST(Compressor, ShapeAndDeterminism) {
  auto c = tiny_config();
  Transformer<float> m(c, 3);
  auto a = compress(m, "d1", {10, 11, 12, 13}, 128);
  auto b = compress(m, "d1", {10, 11, 12, 13}, 128);
  EXPECT_EQ(a.embeddings.shape(), (ad::Shape{c.mem_tokens, c.d_model}));
  EXPECT_EQ(values(a.embeddings), values(b.embeddings));
  EXPECT_EQ(a.source_len, 4u);
}

TEST(Compressor, SliceOfRawForward) {
  auto c = tiny_config();
  Transformer<float> m(c, 3);
  const std::vector<TokenId> doc{20, 21, 22};
  const auto input = compressor_input(doc, c, 128);
  std::vector<TokenId> expected = doc;
  for (std::uint32_t s = 0; s < c.mem_tokens; ++s) expected.push_back(c.mem_id(s));
  EXPECT_EQ(input, expected);
  Graph<float> g(false);
  const auto h = values(m.forward_tokens(g, input));
  const auto e = values(compress(m, "x", doc, 128).embeddings);
  ASSERT_EQ(e.size(), c.mem_tokens * c.d_model);
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(e[i], h[3 * c.d_model + i]);
}

TEST(Compressor, Errors) {
  Transformer<float> m(tiny_config(), 3);
  EXPECT_THROW(compress(m, "d", {}, 128), EmptyDocumentError);
  EXPECT_THROW(compress(m, "", {10}, 128), IdError);
}

TEST(Compressor, TruncationKeepsHead) {
  std::vector<TokenId> t(600);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<TokenId>(i);
  EXPECT_EQ(truncate(t, 512), std::vector<TokenId>(t.begin(), t.begin() + 512));
  std::vector<TokenId> short_doc(100, 7);
  EXPECT_EQ(truncate(short_doc, 512), short_doc);
  Transformer<float> m(tiny_config(), 3);
  std::vector<TokenId> doc(40, 9);
  auto cd = compress(m, "long", doc, 16);
  EXPECT_EQ(cd.source_len, 40u);
  EXPECT_EQ(cd.max_doc_len, 16u);
}

TEST(Compressor, Factor) {
  EXPECT_DOUBLE_EQ(compression_factor(128, 8), 16.0);
  EXPECT_DOUBLE_EQ(compression_factor(2048, 8), 256.0);
  EXPECT_DOUBLE_EQ(compression_factor(8, 8), 1.0);
}

TEST(Listwise, LengthIdentityFuzz) {
  Rng rng(11);
  ModelConfig c = tiny_config();
  c.max_seq_len = 4096;
  c.d_model = 2;
  c.n_heads = 1;
  for (int it = 0; it < 300; ++it) {
    const std::size_t q = 1 + rng.uniform_index(64), k = 1 + rng.uniform_index(64), l = 1 + rng.uniform_index(16);
    std::vector<CompressedDoc<float>> docs;
    for (std::size_t i = 0; i < k; ++i) docs.push_back(random_doc("d" + std::to_string(i), l, 2, rng));
    const auto x = build_listwise_input(c, std::vector<TokenId>(q, 10), docs);
    ASSERT_EQ(x.items.size(), 2 * q + k * (l + 1));
    ASSERT_EQ(x.items.size(), listwise_length(q, k, l));
    ASSERT_EQ(x.final_position, x.items.size() - 1);
    for (std::size_t i = 0; i < k; ++i) ASSERT_EQ(x.sep_positions[i], q + (i + 1) * (l + 1) - 1);
  }
}

TEST(Listwise, SmallestInstance) {
  auto c = tiny_config();
  c.mem_tokens = 8;
  c.max_seq_len = 64;
  Rng rng(1);
  const auto x = build_listwise_input(c, {10}, std::vector<CompressedDoc<float>>{random_doc("a", 8, c.d_model, rng)});
  EXPECT_EQ(x.items.size(), 11u);
  EXPECT_EQ(x.sep_positions, std::vector<std::size_t>{9});
  EXPECT_EQ(x.final_position, 10u);
  EXPECT_EQ(std::get<TokenId>(x.items[9]), c.sep_id);
  EXPECT_EQ(std::get<TokenId>(x.items[10]), 10u);
  EXPECT_EQ(listwise_length(32, 50, 8), 514u);
}

TEST(Listwise, Errors) {
  auto c = tiny_config();
  Rng rng(1);
  EXPECT_THROW(build_listwise_input<float>(c, {10}, {}), ContractError);
  std::vector<CompressedDoc<float>> mixed{random_doc("a", 2, c.d_model, rng), random_doc("b", 3, c.d_model, rng)};
  EXPECT_THROW(build_listwise_input(c, {10}, mixed), ConfigError);
  std::vector<CompressedDoc<float>> many;
  for (int i = 0; i < 30; ++i) many.push_back(random_doc("d", 2, c.d_model, rng));
  try {
    build_listwise_input(c, std::vector<TokenId>(2, 10), many);
    FAIL();
  } catch (const LengthError& e) {
    EXPECT_NE(std::string(e.what()).find("2*2 + 30*(2+1) = 94"), std::string::npos) << e.what();
  }
}

TEST(Listwise, ScoresInRangeAndReproducible) {
  auto c = tiny_config();
  Transformer<float> m(c, 5);
  Rng rng(2);
  std::vector<CompressedDoc<float>> docs;
  for (int i = 0; i < 4; ++i) docs.push_back(random_doc("d" + std::to_string(i), c.mem_tokens, c.d_model, rng));
  const auto x = build_listwise_input(c, {10, 11}, docs);
  Graph<float> g1(false), g2(false);
  const auto a = values(score_listwise(g1, m, x));
  const auto b = values(score_listwise(g2, m, x));
  EXPECT_EQ(a, b);
  for (float s : a) {
    EXPECT_GE(s, -1.0f);
    EXPECT_LE(s, 1.0f);
  }
}

TEST(Listwise, ScoresAreCosinesOfHiddenStates) {
  auto c = tiny_config();
  Transformer<double> m(c, 5);
  Rng rng(2);
  std::vector<CompressedDoc<double>> docs;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> v(c.mem_tokens * c.d_model);
    for (auto& x : v) x = rng.normal();
    docs.push_back({"d" + std::to_string(i), Tensor<double>::from_data({c.mem_tokens, c.d_model}, v), 1, 128});
  }
  const auto x = build_listwise_input(c, {10, 11}, docs);
  Graph<double> g(false);
  const auto h = m.forward(g, x.items);
  const auto s = score_listwise(g, m, x);
  const std::size_t d = c.d_model;
  for (std::size_t i = 0; i < 3; ++i) {
    double dot = 0, nq = 0, nh = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double a = h.data()[x.final_position * d + j], b = h.data()[x.sep_positions[i] * d + j];
      dot += a * b;
      nq += a * a;
      nh += b * b;
    }
    EXPECT_NEAR(s.data()[i], dot / std::sqrt(nq * nh), 1e-12);
  }
}

TEST(Rank, OrderAndTies) {
  EXPECT_EQ(rank({{"a", "b", "c"}, {0.2, 0.9, 0.5}}), (std::vector<std::string>{"b", "c", "a"}));
  EXPECT_EQ(rank({{"c", "a", "b"}, {0.1, 0.1, 0.1}}), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(rank({{"x"}, {0.3}}), std::vector<std::string>{"x"});
}

TEST(Rank, InvariantUnderMonotoneTransform) {
  Rng rng(4);
  for (int it = 0; it < 50; ++it) {
    ScoredCandidates s;
    for (int i = 0; i < 12; ++i) {
      s.doc_ids.push_back("d" + std::to_string(rng.uniform_index(100)));
      s.scores.push_back(std::round(rng.uniform01() * 5) / 5);
    }
    ScoredCandidates t = s;
    for (auto& v : t.scores) v = std::exp(3 * v) - 7;
    EXPECT_EQ(rank(s), rank(t));
  }
}

TEST(PreferencePairs, StrictOnly) {
  const auto p = preference_pairs({1.0, 2.0, 1.0});
  EXPECT_EQ(p, (std::vector<ad::IndexPair>{{1, 0}, {1, 2}}));
  EXPECT_TRUE(preference_pairs({0.5, 0.5}).empty());
}

TEST(RankNet, IndifferenceAndGapsWithPairs) {
  Graph<double> g;
  auto s = Tensor<double>::from_data({3}, {0.4, 0.4, 0.4});
  const auto pairs = preference_pairs({3.0, 2.0, 1.0});
  EXPECT_NEAR(ad::ranknet_loss(g, s, pairs, 0.125).item(), 3 * std::log(2.0), 1e-12);
  auto gap = Tensor<double>::from_data({2}, {0.125, 0.0});
  EXPECT_NEAR(ad::ranknet_loss(g, gap, {{0, 1}}, 0.125).item(), std::log1p(std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(ad::ranknet_loss(g, gap, {{1, 0}}, 0.125).item(), std::log1p(std::exp(1.0)), 1e-12);
  EXPECT_EQ(ad::ranknet_loss(g, gap, {}, 0.125).item(), 0.0);
}

TEST(Pointwise, ZeroHeadScoresZero) {
  auto c = tiny_config();
  Transformer<float> m(c, 5);
  Rng rng(3);
  const auto head = PointwiseHead<float>::zeros(c.d_model);
  Graph<float> g(false);
  EXPECT_EQ(pointwise_score(g, m, head, {10, 11}, random_doc("a", c.mem_tokens, c.d_model, rng)).item(), 0.0f);
  EXPECT_EQ(pointwise_text_score(g, m, head, {10, 11}, {12, 13, 14}).item(), 0.0f);
  const auto items = pointwise_input(c, {10, 11}, random_doc("a", c.mem_tokens, c.d_model, rng));
  EXPECT_EQ(items.size(), 2 + c.mem_tokens + 1);
  EXPECT_EQ(std::get<TokenId>(items.back()), c.sep_id);
}

TEST(FullPipeline, GradientCheck) {
  auto c = tiny_config();
  auto pair = ModelPair<float>::create(c, {CompressorMode::FromScratch, 9, std::nullopt, {}}).cast<double>();
  auto params = pair.trainable_parameters(false);
  const double err = ad::finite_diff_check(
      [&](Graph<double>& g) {
        std::vector<CompressedDoc<double>> docs{compress(g, pair.compressor, "a", {10, 11, 12}, 128),
                                                compress(g, pair.compressor, "b", {13, 14}, 128)};
        const auto x = build_listwise_input(c, {15, 16, 17, 18}, docs);
        return ad::ranknet_loss(g, score_listwise(g, pair.reranker, x), {{0, 1}}, 0.125);
      },
      params);
  EXPECT_LT(err, 1e-4);
}
