#include <gtest/gtest.h>

#include "rrk/tokenizer.hpp"
#include "rrk/transformer.hpp"

using namespace rrk;

namespace {

std::vector<float> values(const Tensor<float>& t) { return {t.data().begin(), t.data().end()}; }

std::vector<float> run(const Transformer<float>& m, const std::vector<InputItem<float>>& items) {
  Graph<float> g(false);
  return values(m.forward(g, items));
}

void randomize_adapters(Transformer<float>& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : m.adapter_parameters())
    for (auto& v : p.tensor.mutable_data()) v = static_cast<float>(rng.normal() * 0.2);
}

}  // namespace

TEST(Transformer, SingleTokenShape) {
  Transformer<float> m(tiny_config(), 1);
  Graph<float> g(false);
  auto h = m.forward_tokens(g, {10});
  EXPECT_EQ(h.shape(), (ad::Shape{1, 8}));
}

TEST(Transformer, LengthAndVocabErrors) {
  auto c = tiny_config();
  Transformer<float> m(c, 1);
  Graph<float> g(false);
  EXPECT_THROW(m.forward_tokens(g, std::vector<TokenId>(c.max_seq_len + 1, 5)), LengthError);
  EXPECT_NO_THROW(m.forward_tokens(g, std::vector<TokenId>(c.max_seq_len, 5)));
  EXPECT_THROW(m.forward_tokens(g, {3, c.vocab_size}), VocabError);
  try {
    m.forward_tokens(g, std::vector<TokenId>(70, 5));
  } catch (const LengthError& e) {
    EXPECT_NE(std::string(e.what()).find("70"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("64"), std::string::npos);
  }
}

TEST(Transformer, Causality) {
  Transformer<float> m(tiny_config(), 2);
  std::vector<TokenId> toks{5, 9, 13, 22, 40, 41, 7};
  Graph<float> g(false);
  const auto base = values(m.forward_tokens(g, toks));
  const std::size_t d = 8;
  for (std::size_t t = 0; t < toks.size(); ++t) {
    auto changed = toks;
    changed[t] = changed[t] == 60 ? 61 : 60;
    const auto out = values(m.forward_tokens(g, changed));
    for (std::size_t i = 0; i < t * d; ++i) ASSERT_EQ(out[i], base[i]) << "t=" << t;
    bool differs = false;
    for (std::size_t i = t * d; i < (t + 1) * d; ++i) differs = differs || out[i] != base[i];
    EXPECT_TRUE(differs);
  }
}

TEST(Transformer, InjectedVectorMatchesTokenEmbedding) {
  auto c = tiny_config();
  Transformer<float> m(c, 3);
  const TokenId w = 17;
  std::vector<float> emb(m.embedding_table().data().begin() + w * c.d_model,
                         m.embedding_table().data().begin() + (w + 1) * c.d_model);
  auto vec = Tensor<float>::from_data({1, c.d_model}, emb);
  const auto mixed = run(m, {TokenId{4}, VectorItem<float>{vec, 0}, TokenId{9}});
  const auto plain = run(m, {TokenId{4}, TokenId{w}, TokenId{9}});
  EXPECT_EQ(mixed, plain);
}

TEST(Transformer, InjectedVectorWidthChecked) {
  Transformer<float> m(tiny_config(), 3);
  auto vec = Tensor<float>::zeros({1, 5});
  Graph<float> g(false);
  EXPECT_THROW(m.forward(g, {TokenId{4}, VectorItem<float>{vec, 0}}), DimensionError);
}

TEST(Transformer, Deterministic) {
  Transformer<float> a(tiny_config(), 9), b(tiny_config(), 9);
  std::vector<InputItem<float>> items{TokenId{5}, TokenId{6}, TokenId{7}};
  EXPECT_EQ(run(a, items), run(b, items));
  Transformer<float> c(tiny_config(), 10);
  EXPECT_NE(run(a, items), run(c, items));
}

TEST(Transformer, PositionSensitivity) {
  Transformer<float> m(tiny_config(), 4);
  Graph<float> g(false);
  const auto a = values(m.forward_tokens(g, {10, 11, 12, 13, 14}));
  const auto b = values(m.forward_tokens(g, {10, 13, 12, 11, 14}));
  const std::vector<float> last_a(a.end() - 8, a.end()), last_b(b.end() - 8, b.end());
  EXPECT_NE(last_a, last_b);
}

TEST(Adapters, ZeroInitIsNeutral) {
  Transformer<float> m(tiny_config(), 5);
  std::vector<InputItem<float>> items{TokenId{5}, TokenId{30}, TokenId{31}, TokenId{50}};
  const auto before = run(m, items);
  m.attach_adapters({Projection::Q, Projection::V}, 2, 4.0f, 77);
  EXPECT_TRUE(m.has_adapters());
  EXPECT_EQ(run(m, items), before);
}

TEST(Adapters, DuplicateAttachThrows) {
  Transformer<float> m(tiny_config(), 5);
  m.attach_adapters({Projection::Q}, 2, 4.0f, 1);
  EXPECT_THROW(m.attach_adapters({Projection::V, Projection::Q}, 2, 4.0f, 1), ContractError);
  EXPECT_THROW(m.attach_adapters({Projection::K}, 0, 4.0f, 1), ContractError);
}

TEST(Adapters, MergeMatchesUnmerged) {
  Transformer<float> m(tiny_config(), 6);
  m.attach_adapters(parse_projections("q,k,v,o,ff"), 2, 4.0f, 3);
  randomize_adapters(m, 12);
  std::vector<InputItem<float>> items{TokenId{5}, TokenId{30}, TokenId{31}, TokenId{50}, TokenId{8}};
  const auto adapted = run(m, items);
  m.merge_adapters();
  EXPECT_FALSE(m.has_adapters());
  const auto merged = run(m, items);
  ASSERT_EQ(adapted.size(), merged.size());
  for (std::size_t i = 0; i < adapted.size(); ++i) EXPECT_NEAR(adapted[i], merged[i], 1e-5);
}

TEST(Adapters, FullRankRepresentsAnyDelta) {
  auto c = tiny_config();
  Transformer<float> m(c, 6);
  m.attach_adapters({Projection::Q}, c.d_model, 8.0f, 3);
  auto a = m.adapter_parameters()[0].tensor;
  // A is square and random: rank d_model means A*B spans every d x d delta.
  auto ad = a.detach();
  std::vector<double> mat(ad.data().begin(), ad.data().end());
  const std::size_t n = c.d_model;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < n && rank < n; ++col) {
    std::size_t piv = rank;
    for (std::size_t r = rank; r < n; ++r)
      if (std::abs(mat[r * n + col]) > std::abs(mat[piv * n + col])) piv = r;
    if (std::abs(mat[piv * n + col]) < 1e-9) continue;
    for (std::size_t k = 0; k < n; ++k) std::swap(mat[rank * n + k], mat[piv * n + k]);
    for (std::size_t r = rank + 1; r < n; ++r) {
      const double f = mat[r * n + col] / mat[rank * n + col];
      for (std::size_t k = 0; k < n; ++k) mat[r * n + k] -= f * mat[rank * n + k];
    }
    ++rank;
  }
  EXPECT_EQ(rank, n);
}

TEST(Adapters, ParseTargets) {
  EXPECT_EQ(parse_projections("q,v"), (std::vector<Projection>{Projection::Q, Projection::V}));
  EXPECT_EQ(parse_projections("ff").size(), 2u);
  EXPECT_THROW(parse_projections("q,x"), ConfigError);
}

TEST(Transformer, TrainableFlags) {
  Transformer<float> m(tiny_config(), 6);
  m.attach_adapters({Projection::Q, Projection::V}, 2, 4.0f, 3);
  m.set_trainable(false, true);
  for (auto& p : m.base_parameters()) EXPECT_FALSE(p.tensor.requires_grad()) << p.name;
  for (auto& p : m.adapter_parameters()) EXPECT_TRUE(p.tensor.requires_grad()) << p.name;
  EXPECT_EQ(m.adapter_parameters().size(), 2u * 2 * 2);
}

TEST(Transformer, CloneIsIndependent) {
  Transformer<float> m(tiny_config(), 6);
  auto c = m.clone();
  std::vector<InputItem<float>> items{TokenId{5}, TokenId{30}};
  EXPECT_EQ(run(m, items), run(c, items));
  c.base_parameters()[1].tensor.mutable_data()[0] += 1.0f;
  EXPECT_NE(run(m, items), run(c, items));
}

TEST(Transformer, GradientCheckDouble) {
  auto c = tiny_config();
  Transformer<float> mf(c, 8);
  mf.attach_adapters({Projection::Q, Projection::V}, 2, 4.0f, 3);
  randomize_adapters(mf, 4);
  auto m = mf.cast<double>();
  std::vector<ad::Tensor<double>> params;
  for (auto& p : m.named_parameters()) params.push_back(p.tensor);
  const double err = ad::finite_diff_check(
      [&](Graph<double>& g) {
        auto h = m.forward_tokens(g, {5, 30, 31, 50, 8});
        return ad::cosine(g, ad::row(g, h, 4), ad::row(g, h, 2));
      },
      params);
  EXPECT_LT(err, 1e-4);
}

TEST(Tokenizer, SplitsAndHashes) {
  auto c = tiny_config();
  Tokenizer tok(c);
  EXPECT_EQ(Tokenizer::split("Hello, World-42!x"),
            (std::vector<std::string>{"hello", "world", "42", "x"}));
  const auto ids = tok.encode("Alpha alpha ALPHA beta");
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids[0], ids[1]);
  EXPECT_EQ(ids[1], ids[2]);
  for (auto id : ids) {
    EXPECT_GE(id, c.reserved_count());
    EXPECT_LT(id, c.vocab_size);
  }
  EXPECT_TRUE(tok.encode(" ,;").empty());
}

TEST(ModelConfig, Validation) {
  auto c = tiny_config();
  EXPECT_NO_THROW(c.validate());
  auto bad = c;
  bad.n_heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.sep_id = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.mem_tokens = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  ModelConfig big;
  EXPECT_NO_THROW(big.validate_listwise(32, 50));
  EXPECT_THROW(big.validate_listwise(300, 50), ConfigError);
}
