#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rrk/bench.hpp"
#include "rrk/corpus.hpp"
#include "rrk/index.hpp"
#include "rrk/pipeline.hpp"

namespace rrk {

namespace fs = std::filesystem;

/// Files written by gen-corpus inside one directory.
struct CorpusFiles {
  fs::path corpus, train_queries, eval_queries, qrels;
  static CorpusFiles in(const fs::path& dir);
};

struct GenCorpusArgs {
  fs::path out;
  CorpusSpec spec;
  ModelConfig model;  // tokenizer layout
  bool force = false;
};

/// Refuses (ConfigError) to overwrite an existing corpus without force.
void run_gen_corpus(const GenCorpusArgs& args, std::ostream& log);

struct TrainArgs {
  ModelConfig model;
  fs::path corpus_dir;
  fs::path out_dir;
  CompressorMode compressor = CompressorMode::Finetune;
  /// Starting weights for frozen/finetune.
  std::optional<fs::path> init_checkpoint;
  /// Continue a previous run: weights, mode and step count come from here.
  std::optional<fs::path> resume;
  TrainOptions train;
  TrainingSetOptions set;
  /// More than one mixes teachers with different score scales by query.
  std::size_t teachers = 1;
  /// Report held-out Kendall tau and nDCG after training.
  bool evaluate = true;
  std::size_t eval_pool = 50;
};

struct TrainOutcome {
  std::vector<StepLog> log;
  fs::path final_checkpoint;
  std::optional<DistillReport> report;
};

/// Writes training_set.jsonl, loss.csv, epoch-N.ckpt per epoch and final.ckpt.
TrainOutcome run_train(const TrainArgs& args, std::ostream& log);

struct CompressArgs {
  fs::path checkpoint;
  fs::path corpus;
  fs::path out_index;
  std::size_t max_doc_len = 128;
  DType dtype = DType::F32;
  std::size_t threads = 1;
};

IndexBuildStats run_compress(const CompressArgs& args, std::ostream& log);

struct RerankArgs {
  fs::path index;
  fs::path checkpoint;
  fs::path corpus;
  fs::path queries;
  fs::path out_run;
  std::size_t topk = 50;
  std::string tag = "rrk-toy";
  LossMode scoring = LossMode::Listwise;
};

/// First-stage retrieval, embedding fetch, scoring, TREC run. Candidates
/// missing from the index are dropped with a warning.
std::size_t run_rerank(const RerankArgs& args, std::ostream& log);

struct EvalArgs {
  fs::path run;
  fs::path qrels;
  std::size_t k = 10;
  Gain gain = Gain::Exponential;
};

EvalSummary run_eval(const EvalArgs& args, std::ostream& out, std::ostream& log);

struct BenchArgs {
  fs::path checkpoint;
  fs::path index;
  fs::path corpus;
  fs::path queries;
  std::vector<std::string> systems{"compressed_listwise", "pointwise_textual"};
  std::size_t k = 50;
  std::size_t doc_len = 256;
  BenchOptions options;
  std::optional<fs::path> out_csv;
};

LatencyReport run_bench(const BenchArgs& args, std::ostream& out, std::ostream& log);

/// Threads for corpus compression from RRK_THREADS, default 1.
std::size_t threads_from_env();

}  // namespace rrk
