// Acceptance runner: one PASS/FAIL line per criterion. Thresholds are fixed
// here and not configurable.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "rrk/checkpoint.hpp"
#include "rrk/commands.hpp"
#include "rrk/fileio.hpp"
#include "rrk/index.hpp"
#include "rrk/retrieval.hpp"

namespace {

using namespace rrk;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const fs::path& p) { return fs::exists(p) ? read_file(p) : std::string(); }

// Distillation recipe for criteria 6-9. The pretrained pair (compressor and
// reranker) is trained from scratch on a disjoint corpus drawn with another
// seed, so the measured runs see the evaluation corpus for exactly
// kDistillEpochs epochs.
constexpr std::uint64_t kSeed = 0;
constexpr std::uint64_t kPretrainSeed = 1;
constexpr std::size_t kPretrainEpochs = 2;
constexpr std::size_t kDistillEpochs = 2;
constexpr double kLr = 1e-3;
constexpr std::size_t kGradAccum = 4;

constexpr double kMinTau = 0.6;
constexpr double kMinNdcgShare = 0.85;
constexpr double kAblationBand = 0.01;
constexpr double kMinSpeedup = 5.0;

class Runner {
 public:
  explicit Runner(fs::path work) : work_(std::move(work)) { fs::create_directories(work_); }

  // 1
  Verdict gradient_check() {
    const auto t0 = Clock::now();
    auto c = tiny_config();
    auto pair = ModelPair<float>::create(c, {CompressorMode::FromScratch, 9, std::nullopt, {}}).cast<double>();
    auto params = pair.trainable_parameters(false);
    const double err = ad::finite_diff_check(
        [&](Graph<double>& g) {
          std::vector<CompressedDoc<double>> docs{compress(g, pair.compressor, "a", {10, 11, 12}, 128),
                                                  compress(g, pair.compressor, "b", {13, 14, 15}, 128)};
          const auto x = build_listwise_input(c, {16, 17, 18, 19}, docs);
          return ad::ranknet_loss(g, score_listwise(g, pair.reranker, x), {{0, 1}}, kDefaultTau);
        },
        params);
    const double secs = seconds_since(t0);
    return {err < 1e-4 && secs < 60,
            "max relative error " + fmt("%.3g", err) + " (< 1e-4) in " + fmt("%.1f", secs) + " s (< 60)"};
  }

  // 2
  Verdict length_identity() {
    Rng rng(2);
    ModelConfig c = tiny_config();
    c.max_seq_len = 2 * 64 + 64 * 17;
    std::size_t bad = 0;
    for (int it = 0; it < 1000; ++it) {
      const std::size_t q = 1 + rng.uniform_index(64), k = 1 + rng.uniform_index(64), l = 1 + rng.uniform_index(16);
      std::vector<CompressedDoc<float>> docs;
      for (std::size_t i = 0; i < k; ++i) {
        std::vector<float> v(l * c.d_model);
        for (auto& x : v) x = static_cast<float>(rng.normal());
        docs.push_back({"d" + std::to_string(i), Tensor<float>::from_data({l, c.d_model}, std::move(v)), 1, 128});
      }
      std::vector<TokenId> query(q);
      for (auto& t : query) t = static_cast<TokenId>(c.reserved_count() + rng.uniform_index(20));
      const auto x = build_listwise_input(c, query, docs);
      if (x.items.size() != 2 * q + k * (l + 1) || listwise_length(q, k, l) != 2 * q + k * (l + 1)) ++bad;
    }
    return {bad == 0, std::to_string(1000 - bad) + "/1000 instances match 2|q| + k(l+1)"};
  }

  // 3
  Verdict ranknet_closed_forms() {
    Graph<double> g(false);
    const double tau = kDefaultTau;
    double worst = 0;
    for (std::size_t k : {2, 5, 16}) {
      auto equal = Tensor<double>::from_data({k}, std::vector<double>(k, 0.3));
      std::vector<ad::IndexPair> pairs;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
          if (i != j) pairs.emplace_back(i, j);
      worst = std::max(worst, std::abs(ad::ranknet_loss(g, equal, pairs, tau).item() -
                                       static_cast<double>(pairs.size()) * std::log(2.0)));
    }
    auto gap = Tensor<double>::from_data({2}, {0.2 + tau, 0.2});
    worst = std::max(worst, std::abs(ad::ranknet_loss(g, gap, {{0, 1}}, tau).item() - std::log1p(std::exp(-1.0))));
    worst = std::max(worst, std::abs(ad::ranknet_loss(g, gap, {{1, 0}}, tau).item() - std::log1p(std::exp(1.0))));
    return {worst <= 1e-9, "worst deviation " + fmt("%.3g", worst) + " (<= 1e-9)"};
  }

  // 4
  Verdict ndcg_oracle() {
    Rng rng(4);
    double worst = 0;
    for (int it = 0; it < 1000; ++it) {
      const auto c = oracle::random_case(rng);
      const bool exp = it % 2 == 0;
      const double got = ndcg_at_k(c.ranking, c.judged, c.k, exp ? Gain::Exponential : Gain::Linear);
      worst = std::max(worst, std::abs(got - oracle::ndcg(c.ranking, c.judged, c.k, exp)));
    }
    const std::map<std::string, int> judged{{"a", 3}, {"b", 2}, {"c", 1}, {"d", 0}};
    const double perfect = ndcg_at_k({"a", "b", "c", "d"}, judged, 10, Gain::Exponential);
    return {worst <= 1e-12 && perfect == 1.0,
            "max |diff| " + fmt("%.3g", worst) + " over 1000 cases (<= 1e-12), perfect ranking " + fmt("%.17g", perfect)};
  }

  // 5
  Verdict offline_online() {
    const auto t0 = Clock::now();
    ModelConfig c;
    CorpusSpec spec;
    spec.docs = 500;
    spec.train_queries = 1;
    spec.eval_queries = 0;
    const Tokenizer tok(c);
    const auto corpus = generate_corpus(spec, tok);
    const auto pair = ModelPair<float>::create(c, {CompressorMode::FromScratch, 5, std::nullopt, {}});
    const auto path = work_ / "c5.idx";
    build_index(corpus.docs, pair.compressor, tok, {128, DType::F32, threads_from_env()}, path);
    const auto index = CompressedIndex::open(path);
    std::size_t equal = 0;
    for (const auto& d : corpus.docs) {
      const auto inline_doc = compress(pair.compressor, d.id, tok.encode(d.text), 128);
      const auto stored = index.get(d.id);
      if (stored && stored->embeddings.size() == inline_doc.embeddings.size() &&
          std::memcmp(stored->embeddings.data().data(), inline_doc.embeddings.data().data(),
                      inline_doc.embeddings.size() * sizeof(float)) == 0)
        ++equal;
    }
    const double secs = seconds_since(t0);
    return {equal == corpus.docs.size() && secs < 120,
            std::to_string(equal) + "/" + std::to_string(corpus.docs.size()) + " bitwise equal in " +
                fmt("%.1f", secs) + " s (< 120)"};
  }

  // 6
  Verdict joint_training() {
    auto& t = toy();
    const auto ck = load_checkpoint(t.pretrained);
    const auto files = CorpusFiles::in(t.corpus);
    const auto docs = read_corpus(files.corpus);
    const auto queries = read_queries(files.train_queries);
    const Tokenizer tok(ck.config);
    const auto data = tokenize_all(tok, docs, queries);
    const auto examples = read_training_set(t.finetune / "training_set.jsonl");

    auto grad_norm = [&](CompressorMode mode) {
      auto pair = ModelPair<float>::create(ck.config, {mode, kSeed, t.pretrained, {Projection::Q, Projection::V}});
      Graph<float> g;
      g.backward(example_loss(g, pair, examples.front(), data, TrainOptions{}));
      double norm = 0;
      for (const auto& p : pair.compressor_parameters())
        if (p.tensor.has_grad())
          for (float v : p.tensor.grad()) norm += static_cast<double>(v) * v;
      return std::sqrt(norm);
    };
    const double fine = grad_norm(CompressorMode::Finetune), frozen = grad_norm(CompressorMode::Frozen);

    // the frozen run trained for kDistillEpochs full epochs
    const auto before = load_checkpoint(t.pretrained), after = load_checkpoint(t.frozen / "final.ckpt");
    std::size_t compared = 0, changed = 0;
    for (const auto* blob : before.with_prefix("compressor.")) {
      ++compared;
      const auto* other = after.find(blob->name);
      if (!other || other->values.size() != blob->values.size() ||
          std::memcmp(other->values.data(), blob->values.data(), blob->values.size() * sizeof(float)) != 0)
        ++changed;
    }
    return {fine > 0 && frozen == 0 && compared > 0 && changed == 0,
            "finetune grad norm " + fmt("%.3g", fine) + " (> 0), frozen " + fmt("%.3g", frozen) + " (== 0), " +
                std::to_string(changed) + "/" + std::to_string(compared) + " frozen tensors changed after " +
                std::to_string(kDistillEpochs) + " epochs"};
  }

  // 7
  Verdict distillation_quality() {
    auto& t = toy();
    const auto& r = t.finetune_report;
    const double secs = t.pretrain_seconds + t.finetune_seconds;
    const bool pass = r.kendall >= kMinTau && r.student_ndcg >= kMinNdcgShare * r.teacher_ndcg && secs < 1800;
    return {pass, "kendall " + fmt("%.4f", r.kendall) + " (>= 0.6), ndcg@10 " + fmt("%.4f", r.student_ndcg) +
                      " vs teacher " + fmt("%.4f", r.teacher_ndcg) + " (>= 0.85x = " +
                      fmt("%.4f", kMinNdcgShare * r.teacher_ndcg) + "), first stage " +
                      fmt("%.4f", r.first_stage_ndcg) + ", " + std::to_string(r.queries) + " queries, " +
                      fmt("%.0f", secs) + " s (< 1800)"};
  }

  // 8
  Verdict ablation() {
    auto& t = toy();
    const double fine = t.finetune_report.student_ndcg, frozen = t.frozen_report.student_ndcg;
    return {fine >= frozen - kAblationBand,
            "finetune ndcg@10 " + fmt("%.4f", fine) + " >= frozen " + fmt("%.4f", frozen) + " - 0.01"};
  }

  // 9
  Verdict efficiency() {
    auto& t = toy();
    const auto index = work_ / "c9.idx";
    std::ostringstream sink;
    run_compress({t.finetune / "final.ckpt", CorpusFiles::in(t.corpus).corpus, index, 128, DType::F32,
                  threads_from_env()},
                 sink);
    BenchArgs b;
    b.checkpoint = t.finetune / "final.ckpt";
    b.index = index;
    b.corpus = CorpusFiles::in(t.corpus).corpus;
    b.queries = CorpusFiles::in(t.corpus).eval_queries;
    b.systems = {"compressed_listwise", "pointwise_textual"};
    b.k = 50;
    b.doc_len = 256;
    b.options = {3, 5, 1};
    const auto report = run_bench(b, sink, sink);
    const auto& text = report.systems.at(1);
    const double ratio = text.ratio.value_or(0);
    return {!text.failure && ratio >= kMinSpeedup && report.systems[0].repeat_s_per_q.size() >= 5,
            "pointwise_textual / compressed_listwise = " + fmt("%.2f", ratio) + " (>= 5) at k=50, |d|=256, l=8; " +
                fmt("%.4f", report.systems[0].mean_s_per_q) + " vs " + fmt("%.4f", text.mean_s_per_q) +
                " s/query, median of 5 repeats"};
  }

  // 10
  Verdict determinism() {
    const auto corpus = work_ / "c10-corpus";
    std::ostringstream sink;
    CorpusSpec spec;
    spec.docs = 400;
    spec.topics = 8;
    spec.train_queries = 12;
    spec.eval_queries = 6;
    spec.seed = 10;
    run_gen_corpus({corpus, spec, ModelConfig{}, true}, sink);
    auto once = [&](const std::string& name) {
      const auto dir = work_ / name;
      fs::remove_all(dir);
      TrainArgs a;
      a.corpus_dir = corpus;
      a.out_dir = dir;
      a.compressor = CompressorMode::FromScratch;
      a.train.epochs = 1;
      a.train.seed = a.set.seed = a.model.rng_seed = 10;
      a.evaluate = false;
      run_train(a, sink);
      run_compress({dir / "final.ckpt", CorpusFiles::in(corpus).corpus, dir / "index.bin", 128, DType::F32, 1}, sink);
      run_rerank({dir / "index.bin", dir / "final.ckpt", CorpusFiles::in(corpus).corpus,
                  CorpusFiles::in(corpus).eval_queries, dir / "run.txt", 50, "rrk-toy", LossMode::Listwise},
                 sink);
      std::ostringstream out;
      run_eval({dir / "run.txt", CorpusFiles::in(corpus).qrels, 10, Gain::Exponential}, out, sink);
      return std::pair{dir, out.str()};
    };
    const auto [a, eval_a] = once("c10-a");
    const auto [b, eval_b] = once("c10-b");
    std::vector<std::string> differ;
    for (auto f : {"final.ckpt", "epoch-1.ckpt", "loss.csv", "training_set.jsonl", "index.bin", "run.txt"})
      if (slurp(a / f).empty() || slurp(a / f) != slurp(b / f)) differ.push_back(f);
    if (eval_a != eval_b) differ.push_back("eval output");
    std::string detail = differ.empty() ? "checkpoints, loss, training set, index, run and eval identical"
                                        : "differs:";
    for (const auto& d : differ) detail += " " + d;
    return {differ.empty(), detail};
  }

  // 11
  Verdict golden() {
    const fs::path dir = RRK_GOLDEN_DIR;
    std::vector<std::string> bad;
    const auto qrels = read_file(dir / "qrels.txt");
    if (format_qrels(parse_qrels(qrels)) != qrels) bad.push_back("qrels");
    const auto run_text = read_file(dir / "run.txt");
    std::vector<std::pair<std::string, ScoredCandidates>> results;
    for (const auto& [qid, entries] : parse_run(run_text)) {
      ScoredCandidates sc;
      for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        sc.doc_ids.push_back(it->doc_id);
        sc.scores.push_back(it->score);
      }
      results.emplace_back(qid, sc);
    }
    if (format_run(results, "rrk-toy") != run_text) bad.push_back("run");

    auto doc = [](std::string id, std::vector<float> v) {
      return CompressedDoc<float>{std::move(id), Tensor<float>::from_data({2, 3}, std::move(v)), 0, 0};
    };
    const std::vector<CompressedDoc<float>> docs{
        doc("d2", {0.5f, -1.f, 2.f, 0.25f, 3.5f, -0.125f}),
        doc("d10", {1.f, 0.f, -2.f, 1024.f, std::ldexp(-1.f, -10), std::ldexp(1.f, -14)})};
    std::size_t truncations = 0, detected = 0;
    for (auto [dtype, file] : {std::pair{DType::F32, "index_f32.bin"}, std::pair{DType::F16, "index_f16.bin"}}) {
      const auto bytes = read_file(dir / file);
      if (encode_index(docs, 2, 3, dtype) != bytes) bad.push_back(file);
      for (std::size_t n = 0; n < bytes.size(); ++n, ++truncations) {
        try {
          CompressedIndex::from_bytes(bytes.substr(0, n));
        } catch (const CorruptionError&) {
          ++detected;
        }
      }
    }
    if (detected != truncations) bad.push_back("truncation");
    std::string detail = "qrels, run, f32/f16 index bytes match; " + std::to_string(detected) + "/" +
                         std::to_string(truncations) + " truncations detected";
    if (!bad.empty()) {
      detail = "mismatch:";
      for (const auto& b : bad) detail += " " + b;
    }
    return {bad.empty(), detail};
  }

 private:
  struct Toy {
    fs::path corpus, pretrain_corpus, pretrain, pretrained, finetune, frozen;
    DistillReport finetune_report, frozen_report;
    double pretrain_seconds = 0, finetune_seconds = 0, frozen_seconds = 0;
  };

  // Default corpus and model; pretrain once, then finetune and frozen runs
  // under identical budgets.
  Toy& toy() {
    if (toy_) return *toy_;
    Toy t;
    t.corpus = work_ / "toy-corpus";
    t.pretrain_corpus = work_ / "pretrain-corpus";
    t.pretrain = work_ / "toy-pretrain";
    t.finetune = work_ / "toy-finetune";
    t.frozen = work_ / "toy-frozen";
    std::ostream& log = std::cerr;
    CorpusSpec spec;
    spec.seed = kSeed;
    run_gen_corpus({t.corpus, spec, ModelConfig{}, true}, log);
    spec.seed = kPretrainSeed;
    run_gen_corpus({t.pretrain_corpus, spec, ModelConfig{}, true}, log);

    auto args = [&](const fs::path& out, CompressorMode mode, std::size_t epochs) {
      TrainArgs a;
      a.corpus_dir = mode == CompressorMode::FromScratch ? t.pretrain_corpus : t.corpus;
      a.out_dir = out;
      a.compressor = mode;
      a.train.lr = kLr;
      a.train.grad_accum = kGradAccum;
      a.train.epochs = epochs;
      a.train.seed = a.set.seed = a.model.rng_seed = mode == CompressorMode::FromScratch ? kPretrainSeed : kSeed;
      return a;
    };
    auto t0 = Clock::now();
    auto pre = args(t.pretrain, CompressorMode::FromScratch, kPretrainEpochs);
    pre.evaluate = false;
    t.pretrained = run_train(pre, log).final_checkpoint;
    t.pretrain_seconds = seconds_since(t0);

    for (auto mode : {CompressorMode::Finetune, CompressorMode::Frozen}) {
      const bool fine = mode == CompressorMode::Finetune;
      auto a = args(fine ? t.finetune : t.frozen, mode, kDistillEpochs);
      a.init_checkpoint = t.pretrained;
      t0 = Clock::now();
      const auto out = run_train(a, log);
      (fine ? t.finetune_seconds : t.frozen_seconds) = seconds_since(t0);
      (fine ? t.finetune_report : t.frozen_report) = out.report.value();
    }
    toy_ = t;
    return *toy_;
  }

  fs::path work_;
  std::optional<Toy> toy_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string work = (fs::temp_directory_path() / "rrk-acceptance").string();
  app.add_option("criteria", only, "criteria to run (default: all)")->check(CLI::Range(1, 11));
  app.add_option("--work-dir", work, "scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  Runner r(work);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"gradient correctness", [&] { return r.gradient_check(); }},
      {"input-length identity", [&] { return r.length_identity(); }},
      {"RankNet closed forms", [&] { return r.ranknet_closed_forms(); }},
      {"nDCG oracle equivalence", [&] { return r.ndcg_oracle(); }},
      {"offline/online compression equivalence", [&] { return r.offline_online(); }},
      {"joint-training contract", [&] { return r.joint_training(); }},
      {"toy distillation quality", [&] { return r.distillation_quality(); }},
      {"compression ordering ablation", [&] { return r.ablation(); }},
      {"efficiency", [&] { return r.efficiency(); }},
      {"determinism", [&] { return r.determinism(); }},
      {"format golden tests", [&] { return r.golden(); }},
  };
  std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
