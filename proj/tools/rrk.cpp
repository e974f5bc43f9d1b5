#include <CLI11.hpp>

#include <iostream>

#include "rrk/commands.hpp"
#include "rrk/fileio.hpp"

namespace {

using namespace rrk;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

void add_model_options(CLI::App& app, ModelConfig& m) {
  app.add_option("--vocab", m.vocab_size, "vocabulary size")->capture_default_str();
  app.add_option("--d-model", m.d_model, "hidden width")->capture_default_str();
  app.add_option("--layers", m.n_layers, "decoder layers")->capture_default_str();
  app.add_option("--heads", m.n_heads, "attention heads")->capture_default_str();
  app.add_option("--d-ff", m.d_ff, "MLP width")->capture_default_str();
  app.add_option("--max-seq-len", m.max_seq_len, "longest input")->capture_default_str();
  app.add_option("--mem-tokens", m.mem_tokens, "memory tokens per document (l)")->capture_default_str();
  app.add_option("--lora-rank", m.lora_rank, "adapter rank")->capture_default_str();
  app.add_option("--lora-alpha", m.lora_alpha, "adapter scaling numerator")->capture_default_str();
}

template <typename E>
CLI::Option* add_enum(CLI::App& app, const std::string& name, E& target, E (*parse)(const std::string&),
                      const char* (*print)(E), const std::string& help) {
  return app
      .add_option_function<std::string>(
          name,
          [&target, parse, name](const std::string& s) {
            try {
              target = parse(s);
            } catch (const ConfigError& e) {
              throw CLI::ValidationError(name, e.what());
            }
          },
          help)
      ->default_str(print(target));
}

/// Resolved configuration: every option with its effective value.
void emit_config(const CLI::App& app, const std::optional<fs::path>& path) {
  const auto text = app.config_to_str(true, false);
  std::cerr << "# resolved config\n" << text;
  if (path) write_file_atomic(*path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rrk: listwise reranking over compressed document embeddings"};
  app.set_config("--config", "", "key = value config file; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  ModelConfig model;
  std::uint64_t seed = 0;
  add_model_options(app, model);
  app.add_option("--seed", seed, "seed for all randomness")->capture_default_str();

  GenCorpusArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "generate the toy corpus, queries and qrels");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--docs", gen.spec.docs, "documents")->capture_default_str();
  gen_cmd->add_option("--queries", gen.spec.train_queries, "training queries")->capture_default_str();
  gen_cmd->add_option("--eval-queries", gen.spec.eval_queries, "held-out queries")->capture_default_str();
  gen_cmd->add_option("--topics", gen.spec.topics, "topics")->capture_default_str();
  gen_cmd->add_option("--facets", gen.spec.facets, "facets per topic")->capture_default_str();
  gen_cmd->add_option("--values", gen.spec.values, "values per facet")->capture_default_str();
  gen_cmd->add_option("--forms", gen.spec.forms, "surface forms per value")->capture_default_str();
  gen_cmd->add_flag("--force", gen.force, "overwrite existing files");

  TrainArgs tr;
  std::string init_ckpt, resume;
  auto* train_cmd = app.add_subcommand("train", "distill the teacher into the compressor and reranker");
  train_cmd->add_option("--corpus-dir", tr.corpus_dir, "directory written by gen-corpus")->required();
  train_cmd->add_option("--out", tr.out_dir, "output directory for checkpoints and loss.csv")->required();
  add_enum(*train_cmd, "--mode", tr.train.loss, parse_loss_mode, loss_mode_name, "listwise|pointwise");
  add_enum(*train_cmd, "--compressor", tr.compressor, parse_compressor_mode, compressor_mode_name,
           "frozen|scratch|finetune");
  train_cmd->add_option("--init-checkpoint", init_ckpt, "starting weights (frozen/finetune)");
  train_cmd->add_option("--resume", resume, "continue from a checkpoint written by train");
  train_cmd->add_option("--lr", tr.train.lr, "learning rate")->capture_default_str();
  train_cmd->add_option("--epochs", tr.train.epochs, "epochs")->capture_default_str();
  train_cmd->add_option("--grad-accum", tr.train.grad_accum, "examples accumulated per step")->capture_default_str();
  train_cmd->add_option("--batch", tr.train.batch, "examples per micro-batch")->capture_default_str();
  train_cmd->add_option("--warmup", tr.train.warmup_steps, "linear warmup steps")->capture_default_str();
  train_cmd->add_option("--max-steps", tr.train.max_steps, "stop after this many steps (0 = no limit)")
      ->capture_default_str();
  train_cmd->add_option("--tau", tr.train.tau, "RankNet temperature")->capture_default_str();
  train_cmd->add_option("--max-doc-len", tr.train.max_doc_len, "document truncation")->capture_default_str();
  train_cmd->add_option("--n-docs", tr.set.n_docs, "documents per example")->capture_default_str();
  train_cmd->add_option("--pool", tr.set.pool, "first-stage pool sampled from")->capture_default_str();
  train_cmd->add_option("--teachers", tr.teachers, "number of mixed teachers")->capture_default_str();
  train_cmd->add_flag("--no-eval{false}", tr.evaluate, "skip the held-out report");

  CompressArgs comp;
  std::string dtype = "f32";
  auto* comp_cmd = app.add_subcommand("compress", "build the compressed document index");
  comp_cmd->add_option("--checkpoint", comp.checkpoint, "trained checkpoint")->required();
  comp_cmd->add_option("--corpus", comp.corpus, "corpus JSONL")->required();
  comp_cmd->add_option("--out-index", comp.out_index, "index file")->required();
  comp_cmd->add_option("--max-doc-len", comp.max_doc_len, "document truncation")->capture_default_str();
  comp_cmd->add_option("--dtype", dtype, "f32|f16")->capture_default_str();

  RerankArgs rr;
  auto* rr_cmd = app.add_subcommand("rerank", "rerank first-stage candidates into a TREC run");
  rr_cmd->add_option("--index", rr.index, "compressed index")->required();
  rr_cmd->add_option("--checkpoint", rr.checkpoint, "trained checkpoint")->required();
  rr_cmd->add_option("--corpus", rr.corpus, "corpus JSONL for the first stage")->required();
  rr_cmd->add_option("--queries", rr.queries, "queries TSV")->required();
  rr_cmd->add_option("--out-run", rr.out_run, "run file")->required();
  rr_cmd->add_option("--topk", rr.topk, "candidates per query")->capture_default_str();
  rr_cmd->add_option("--tag", rr.tag, "run tag")->capture_default_str();
  add_enum(*rr_cmd, "--scoring", rr.scoring, parse_loss_mode, loss_mode_name, "listwise|pointwise");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "nDCG of a run against qrels");
  ev_cmd->add_option("--run", ev.run, "run file")->required();
  ev_cmd->add_option("--qrels", ev.qrels, "qrels file")->required();
  ev_cmd->add_option("--k", ev.k, "cutoff")->capture_default_str();
  ev_cmd->add_option_function<std::string>(
            "--gain",
            [&ev](const std::string& s) {
              try {
                ev.gain = parse_gain(s);
              } catch (const ConfigError& e) {
                throw CLI::ValidationError("--gain", e.what());
              }
            },
            "exp|lin")
      ->default_str("exp");

  BenchArgs bn;
  std::string bench_csv;
  auto* bn_cmd = app.add_subcommand("bench", "latency of compressed vs textual reranking");
  bn_cmd->add_option("--checkpoint", bn.checkpoint, "trained checkpoint")->required();
  bn_cmd->add_option("--index", bn.index, "compressed index")->required();
  bn_cmd->add_option("--corpus", bn.corpus, "corpus JSONL")->required();
  bn_cmd->add_option("--queries", bn.queries, "queries TSV")->required();
  bn_cmd->add_option("--systems", bn.systems, "compressed_listwise|pointwise_textual|textual_listwise")
      ->delimiter(',')
      ->capture_default_str();
  bn_cmd->add_option("--k", bn.k, "candidates per query")->capture_default_str();
  bn_cmd->add_option("--doc-len", bn.doc_len, "textual document length |d|")->capture_default_str();
  bn_cmd->add_option("--n-queries", bn.options.queries, "queries timed")->capture_default_str();
  bn_cmd->add_option("--repeats", bn.options.repeats, "timed repeats (>= 3)")->capture_default_str();
  bn_cmd->add_option("--warmup", bn.options.warmup, "warmup passes (>= 1)")->capture_default_str();
  bn_cmd->add_option("--out-csv", bench_csv, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen_cmd->parsed()) {
      gen.spec.seed = seed;
      gen.model = model;
      emit_config(app, gen.out / "config.toml");
      run_gen_corpus(gen, std::cerr);
    } else if (train_cmd->parsed()) {
      tr.model = model;
      tr.model.rng_seed = seed;
      tr.train.seed = seed;
      tr.set.seed = seed;
      if (!init_ckpt.empty()) tr.init_checkpoint = init_ckpt;
      if (!resume.empty()) tr.resume = resume;
      emit_config(app, tr.out_dir / "config.toml");
      run_train(tr, std::cerr);
    } else if (comp_cmd->parsed()) {
      comp.dtype = parse_dtype(dtype);
      comp.threads = threads_from_env();
      emit_config(app, fs::path(comp.out_index.string() + ".config.toml"));
      run_compress(comp, std::cout);
    } else if (rr_cmd->parsed()) {
      emit_config(app, fs::path(rr.out_run.string() + ".config.toml"));
      run_rerank(rr, std::cerr);
    } else if (ev_cmd->parsed()) {
      emit_config(app, std::nullopt);
      run_eval(ev, std::cout, std::cerr);
    } else if (bn_cmd->parsed()) {
      if (!bench_csv.empty()) bn.out_csv = bench_csv;
      emit_config(app, bn.out_csv ? std::optional<fs::path>(bench_csv + ".config.toml") : std::nullopt);
      run_bench(bn, std::cout, std::cerr);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const EmptyDocumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
