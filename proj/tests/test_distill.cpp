#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "rrk/distill.hpp"
#include "rrk/fileio.hpp"

using namespace rrk;
namespace fs = std::filesystem;

namespace {

const ModelConfig& config() {
  static const ModelConfig c;
  return c;
}

const ToyCorpus& toy() {
  static const ToyCorpus corpus = [] {
    CorpusSpec spec;
    spec.seed = 1;
    return generate_corpus(spec, Tokenizer(config()));
  }();
  return corpus;
}

}  // namespace

TEST(Bm25, SingleMatchRanksFirst) {
  Tokenizer tok(config());
  std::vector<Document> docs{{"a", "red fox"}, {"b", "blue whale"}, {"c", "green frog"}};
  Bm25Index idx(docs, tok);
  const auto hits = idx.retrieve("whale", 50);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].doc_id, "b");
  EXPECT_GT(hits[0].score, 0);
  EXPECT_EQ(hits[1].doc_id, "a");
  EXPECT_EQ(hits[1].score, 0);
  EXPECT_TRUE(idx.retrieve("unknownword", 5).empty());
  EXPECT_THROW(idx.retrieve("whale", 0), ContractError);
}

TEST(Bm25, DuplicatesTieByIdAndClamp) {
  Tokenizer tok(config());
  std::vector<Document> docs;
  for (int i = 39; i >= 0; --i) docs.push_back({"d" + std::to_string(100 + i), "same words here"});
  Bm25Index idx(docs, tok);
  const auto hits = idx.retrieve("words", 50);
  ASSERT_EQ(hits.size(), 40u);
  for (std::size_t i = 1; i < hits.size(); ++i) EXPECT_LT(hits[i - 1].doc_id, hits[i].doc_id);
}

TEST(Bm25, MatchesHandComputedScore) {
  Tokenizer tok(config());
  std::vector<Document> docs{{"a", "x y y"}, {"b", "y z"}, {"c", "z"}};
  Bm25Index idx(docs, tok);
  const auto hits = idx.retrieve("y", 3);
  const double n = 3, df = 2, avg = 2, k1 = 0.9, b = 0.4;
  const double idf = std::log(1 + (n - df + 0.5) / (df + 0.5));
  const double sa = idf * 2 * (k1 + 1) / (2 + k1 * (1 - b + b * 3 / avg));
  const double sb = idf * 1 * (k1 + 1) / (1 + k1 * (1 - b + b * 2 / avg));
  EXPECT_EQ(hits[0].doc_id, "a");
  EXPECT_NEAR(hits[0].score, sa, 1e-12);
  EXPECT_NEAR(hits[1].score, sb, 1e-12);
}

TEST(Teacher, ConsistentAndDeterministic) {
  Qrels qrels;
  qrels["q"]["good"] = 3;
  Teacher t(qrels);
  EXPECT_GT(t.score("q", "good"), t.score("q", "bad"));
  EXPECT_EQ(t.score("q", "good"), t.score("q", "good"));
  for (int i = 0; i < 1000; ++i) EXPECT_LE(std::fabs(Teacher::jitter("q", "d" + std::to_string(i))), 0.05);
  Teacher scaled(qrels, 5.0, -2.0, 1);
  EXPECT_NEAR(scaled.score("q", "good"), 5.0 * (3 + Teacher::jitter("q", "good", 1)) - 2.0, 1e-12);
}

TEST(Teacher, AgreesWithGradesOnPools) {
  const auto& c = toy();
  Tokenizer tok(config());
  Bm25Index idx(c.docs, tok);
  Teacher t(c.qrels);
  for (const auto& q : c.train_queries) {
    std::vector<double> ts, rel;
    for (const auto& h : idx.retrieve(q.text, 50)) {
      ts.push_back(t.score(q.id, h.doc_id));
      rel.push_back(grade(c.qrels, q.id, h.doc_id));
    }
    EXPECT_GE(kendall_tau(ts, rel), 0.95) << q.id;
  }
}

TEST(Corpus, DefaultsDeterminismAndPools) {
  const auto& c = toy();
  EXPECT_EQ(c.docs.size(), 2000u);
  EXPECT_EQ(c.train_queries.size(), 200u);
  EXPECT_EQ(c.eval_queries.size(), 50u);
  CorpusSpec spec;
  spec.seed = 1;
  const auto again = generate_corpus(spec, Tokenizer(config()));
  EXPECT_EQ(format_corpus_jsonl(again.docs), format_corpus_jsonl(c.docs));
  EXPECT_EQ(format_qrels(again.qrels), format_qrels(c.qrels));
  spec.seed = 2;
  EXPECT_NE(format_corpus_jsonl(generate_corpus(spec, Tokenizer(config())).docs), format_corpus_jsonl(c.docs));
  Tokenizer tok(config());
  Bm25Index idx(c.docs, tok);
  std::set<std::string> texts;
  for (const auto* qs : {&c.train_queries, &c.eval_queries}) {
    for (const auto& q : *qs) {
      EXPECT_GE(idx.retrieve(q.text, 50).size(), 50u);
      EXPECT_TRUE(texts.insert(q.text).second);
    }
  }
  for (const auto& [q, docs] : c.qrels)
    for (const auto& [d, r] : docs) {
      EXPECT_GE(r, 1);
      EXPECT_LE(r, 3);
    }
  spec.docs = 0;
  EXPECT_THROW(generate_corpus(spec, tok), ConfigError);
}

TEST(Corpus, FileRoundTrip) {
  const auto dir = fs::temp_directory_path() / ("rrk_corpus_" + std::to_string(::getpid()));
  write_corpus_dir(dir, toy());
  EXPECT_EQ(format_corpus_jsonl(read_corpus(dir / "corpus.jsonl")), format_corpus_jsonl(toy().docs));
  EXPECT_EQ(format_queries_tsv(read_queries(dir / "eval_queries.tsv")), format_queries_tsv(toy().eval_queries));
  EXPECT_EQ(read_qrels(dir / "qrels.txt"), toy().qrels);
  fs::remove_all(dir);
  EXPECT_THROW(parse_queries_tsv("no tab here\n"), FormatError);
  EXPECT_THROW(parse_corpus_jsonl("{\"id\": 1}\n"), FormatError);
}

TEST(TrainingSet, ShapeDeterminismAndRoundTrip) {
  const auto& c = toy();
  Tokenizer tok(config());
  Bm25Index idx(c.docs, tok);
  Teacher t(c.qrels);
  const auto a = build_training_set(c.train_queries, idx, t, {16, 50, 3});
  const auto b = build_training_set(c.train_queries, idx, t, {16, 50, 3});
  ASSERT_EQ(a.size(), c.train_queries.size());
  EXPECT_EQ(format_training_set(a), format_training_set(b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ex = a[i];
    ASSERT_EQ(ex.qid, c.train_queries[i].id);
    ASSERT_EQ(ex.docs.size(), 16u);
    ASSERT_EQ(ex.teacher_scores.size(), 16u);
    std::set<std::string> pool;
    for (const auto& h : idx.retrieve(c.train_queries[i].text, 50)) pool.insert(h.doc_id);
    for (std::size_t j = 0; j < 16; ++j) {
      EXPECT_TRUE(pool.count(ex.docs[j]));
      EXPECT_EQ(ex.teacher_scores[j], t.score(ex.qid, ex.docs[j]));
    }
    EXPECT_EQ(std::set<std::string>(ex.docs.begin(), ex.docs.end()).size(), 16u);
  }
  EXPECT_EQ(parse_training_set(format_training_set(a)), a);
  const auto full = build_training_set(c.train_queries, idx, t, {50, 50, 3});
  const auto hits = idx.retrieve(c.train_queries[0].text, 50);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(full[0].docs[i], hits[i].doc_id);
  EXPECT_THROW(build_training_set(c.train_queries, idx, t, {16, 8, 3}), ConfigError);
}

TEST(TrainingSet, SkipsShortPools) {
  Tokenizer tok(config());
  std::vector<Document> docs{{"a", "x"}, {"b", "y"}};
  Bm25Index idx(docs, tok);
  Qrels qrels;
  std::vector<std::string> skipped;
  const auto set = build_training_set({{"q1", "x"}}, idx, Teacher(qrels), {16, 50, 0}, &skipped);
  EXPECT_TRUE(set.empty());
  EXPECT_EQ(skipped, std::vector<std::string>{"q1"});
}

TEST(TrainingSet, UniformPoolPositions) {
  // each position of a 50-pool drawn with frequency 16/50
  std::vector<std::size_t> count(50, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Rng rng(mix64(99 ^ fnv1a("q" + std::to_string(i))));
    for (auto p : rng.sample_without_replacement(50, 16)) ++count[p];
  }
  for (auto n : count) EXPECT_NEAR(static_cast<double>(n) / draws, 16.0 / 50.0, 0.02);
}

TEST(MixedTeacher, RoutesByQuery) {
  Qrels qrels;
  qrels["q"]["d"] = 2;
  MixedTeacher m({Teacher(qrels), Teacher(qrels, 10.0, 0.0, 1)});
  std::set<std::size_t> routes;
  for (int i = 0; i < 50; ++i) routes.insert(m.route("q" + std::to_string(i)));
  EXPECT_EQ(routes.size(), 2u);
  EXPECT_EQ(m.score("q", "d"), m.score("q", "d"));
}
