#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "rrk/eval.hpp"
#include "rrk/fileio.hpp"
#include "rrk/index.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kModel =
    " --vocab 512 --d-model 16 --layers 1 --heads 2 --d-ff 32 --max-seq-len 512 --mem-tokens 8"
    " --lora-rank 2 --lora-alpha 4";

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / ("rrk_cli_" + std::to_string(::getpid()) + ".log");
  const std::string cmd = std::string(RRK_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  fs::remove(log);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("rrk_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string small_corpus(const fs::path& dir, int seed = 3) {
  return kModel + " --seed " + std::to_string(seed) + " gen-corpus --out " + dir.string() +
         " --docs 200 --queries 6 --eval-queries 3 --topics 4";
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("eval --run x").code, 1);  // missing --qrels
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, GenCorpusIsDeterministicAndRefusesOverwrite) {
  auto a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
  ASSERT_EQ(run(small_corpus(a)).code, 0);
  ASSERT_EQ(run(small_corpus(b)).code, 0);
  for (auto f : {"corpus.jsonl", "train_queries.tsv", "eval_queries.tsv", "qrels.txt"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  EXPECT_TRUE(fs::exists(a / "config.toml"));

  auto again = run(small_corpus(a));
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.out.find("--force"), std::string::npos) << again.out;
  EXPECT_EQ(run(small_corpus(a) + " --force").code, 0);

  auto c = fresh_dir("gen_c");
  ASSERT_EQ(run(small_corpus(c, 4)).code, 0);
  EXPECT_NE(slurp(a / "corpus.jsonl"), slurp(c / "corpus.jsonl"));
}

TEST(Cli, ZeroDocsIsAnError) {
  auto d = fresh_dir("zero");
  EXPECT_NE(run(kModel + " gen-corpus --out " + d.string() + " --docs 0").code, 0);
}

TEST(Cli, PerfectRunScoresHundred) {
  auto d = fresh_dir("eval");
  rrk::Qrels qrels;
  qrels["q1"] = {{"a", 3}, {"b", 1}};
  qrels["q2"] = {{"c", 2}};
  rrk::write_file_atomic(d / "qrels.txt", rrk::format_qrels(qrels));
  std::ofstream(d / "run.txt") << "q1 Q0 a 1 0.9 t\nq1 Q0 b 2 0.5 t\nq1 Q0 z 3 0.1 t\nq2 Q0 c 1 0.3 t\n";
  auto r = run("eval --run " + (d / "run.txt").string() + " --qrels " + (d / "qrels.txt").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("ndcg@10 100.00"), std::string::npos) << r.out;

  std::ofstream(d / "orphan.txt") << "q9 Q0 a 1 0.9 t\n";
  r = run("eval --run " + (d / "orphan.txt").string() + " --qrels " + (d / "qrels.txt").string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("ndcg@10 0.00"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("q9"), std::string::npos) << r.out;

  std::ofstream(d / "bad.txt") << "q1 Q0 a\n";
  EXPECT_EQ(run("eval --run " + (d / "bad.txt").string() + " --qrels " + (d / "qrels.txt").string()).code, 2);
}

// gen-corpus -> train -> compress -> rerank -> eval, twice with one seed.
TEST(Cli, PipelineIsByteDeterministic) {
  auto corpus = fresh_dir("pipe_corpus");
  ASSERT_EQ(run(small_corpus(corpus)).code, 0);

  auto pipeline = [&](const std::string& name) {
    auto out = fresh_dir(name);
    auto tr = run(kModel + " --seed 5 train --corpus-dir " + corpus.string() + " --out " + out.string() +
                  " --compressor scratch --epochs 1 --n-docs 4 --pool 8 --grad-accum 2 --no-eval");
    EXPECT_EQ(tr.code, 0) << tr.out;
    auto cp = run("compress --checkpoint " + (out / "final.ckpt").string() + " --corpus " +
                  (corpus / "corpus.jsonl").string() + " --out-index " + (out / "index.bin").string());
    EXPECT_EQ(cp.code, 0) << cp.out;
    EXPECT_NE(cp.out.find("compression_factor 16.00"), std::string::npos) << cp.out;
    auto rr = run("rerank --index " + (out / "index.bin").string() + " --checkpoint " +
                  (out / "final.ckpt").string() + " --corpus " + (corpus / "corpus.jsonl").string() +
                  " --queries " + (corpus / "eval_queries.tsv").string() + " --out-run " +
                  (out / "run.txt").string() + " --topk 10");
    EXPECT_EQ(rr.code, 0) << rr.out;
    auto ev = run("eval --run " + (out / "run.txt").string() + " --qrels " + (corpus / "qrels.txt").string());
    EXPECT_EQ(ev.code, 0) << ev.out;
    return out;
  };
  auto a = pipeline("pipe_a"), b = pipeline("pipe_b");
  for (auto f : {"final.ckpt", "epoch-1.ckpt", "loss.csv", "training_set.jsonl", "index.bin", "run.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }

  // every emitted score is a cosine and every query keeps 10 ranks
  auto run_file = rrk::parse_run(slurp(a / "run.txt"));
  EXPECT_EQ(run_file.size(), 3u);
  for (const auto& [qid, docs] : run_file) {
    EXPECT_EQ(docs.size(), 10u) << qid;
    for (const auto& e : docs) {
      EXPECT_GE(e.score, -1.0);
      EXPECT_LE(e.score, 1.0);
    }
  }

  // --topk 1 keeps only rank-1 lines
  auto rr1 = run("rerank --index " + (a / "index.bin").string() + " --checkpoint " + (a / "final.ckpt").string() +
                 " --corpus " + (corpus / "corpus.jsonl").string() + " --queries " +
                 (corpus / "eval_queries.tsv").string() + " --out-run " + (a / "run1.txt").string() +
                 " --topk 1");
  ASSERT_EQ(rr1.code, 0) << rr1.out;
  std::istringstream lines(slurp(a / "run1.txt"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    std::string q, q0, doc, rank;
    f >> q >> q0 >> doc >> rank;
    EXPECT_EQ(rank, "1") << line;
    ++n;
  }
  EXPECT_EQ(n, 3);

  // half precision halves the payload; rebuilding is idempotent
  auto f16 = run("compress --checkpoint " + (a / "final.ckpt").string() + " --corpus " +
                 (corpus / "corpus.jsonl").string() + " --out-index " + (a / "index16.bin").string() +
                 " --dtype f16");
  ASSERT_EQ(f16.code, 0) << f16.out;
  auto i32 = rrk::CompressedIndex::open(a / "index.bin");
  auto i16 = rrk::CompressedIndex::open(a / "index16.bin");
  const auto payload32 = i32.size() * 8 * 16 * 4, payload16 = i16.size() * 8 * 16 * 2;
  EXPECT_EQ(payload16 * 2, payload32);
  EXPECT_EQ(fs::file_size(a / "index.bin") - fs::file_size(a / "index16.bin"), payload32 - payload16);

  // missing checkpoint
  EXPECT_NE(run("compress --checkpoint " + (a / "nope.ckpt").string() + " --corpus " +
                (corpus / "corpus.jsonl").string() + " --out-index " + (a / "x.bin").string())
                .code,
            0);
}

TEST(Cli, InvalidModeComboIsUsageError) {
  auto corpus = fresh_dir("combo_corpus");
  ASSERT_EQ(run(small_corpus(corpus)).code, 0);
  auto out = fresh_dir("combo");
  auto r = run(kModel + " train --corpus-dir " + corpus.string() + " --out " + out.string() +
               " --compressor finetune --no-eval");
  EXPECT_EQ(r.code, 1) << r.out;
  r = run(kModel + " train --corpus-dir " + corpus.string() + " --out " + out.string() + " --mode sideways");
  EXPECT_EQ(r.code, 1) << r.out;
}
