#include "rrk/commands.hpp"

#include <cstdlib>
#include <ostream>

#include "rrk/fileio.hpp"

namespace rrk {
namespace {

template <typename F>
auto with_teacher(const Qrels& qrels, std::size_t teachers, F&& f) {
  if (teachers <= 1) return f(Teacher(qrels));
  std::vector<Teacher> list;
  for (std::size_t i = 0; i < teachers; ++i) {
    list.emplace_back(qrels, 1.0 + 4.0 * static_cast<double>(i), -2.0 * static_cast<double>(i), i);
  }
  return f(MixedTeacher(std::move(list)));
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

CorpusFiles CorpusFiles::in(const fs::path& dir) {
  return {dir / "corpus.jsonl", dir / "train_queries.tsv", dir / "eval_queries.tsv", dir / "qrels.txt"};
}

std::size_t threads_from_env() {
  const char* v = std::getenv("RRK_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError(std::string("RRK_THREADS must be a positive integer, got '") + v + "'");
  return static_cast<std::size_t>(n);
}

void run_gen_corpus(const GenCorpusArgs& args, std::ostream& log) {
  const auto files = CorpusFiles::in(args.out);
  if (!args.force) {
    for (const auto& p : {files.corpus, files.train_queries, files.eval_queries, files.qrels}) {
      if (fs::exists(p)) throw ConfigError(p.string() + " exists; pass --force to overwrite");
    }
  }
  const Tokenizer tok(args.model);
  const auto corpus = generate_corpus(args.spec, tok);
  write_corpus_dir(args.out, corpus);
  log << "wrote " << corpus.docs.size() << " docs, " << corpus.train_queries.size() << " train and "
      << corpus.eval_queries.size() << " eval queries to " << args.out.string() << "\n";
}

TrainOutcome run_train(const TrainArgs& args, std::ostream& log) {
  if (args.resume && args.init_checkpoint) throw ConfigError("--resume and --init-checkpoint are exclusive");
  if (args.compressor == CompressorMode::FromScratch && args.init_checkpoint) {
    throw ConfigError("--compressor scratch takes no --init-checkpoint");
  }
  std::optional<CheckpointData> start;
  if (args.resume) start = load_checkpoint(*args.resume);
  ModelConfig config = args.model;
  if (start) {
    config = start->config;
  } else if (args.init_checkpoint) {
    config = load_checkpoint(*args.init_checkpoint).config;
  }

  const auto files = CorpusFiles::in(args.corpus_dir);
  const auto docs = read_corpus(files.corpus);
  const auto train_queries = read_queries(files.train_queries);
  const auto eval_queries = fs::exists(files.eval_queries) ? read_queries(files.eval_queries) : std::vector<Query>{};
  const auto qrels = read_qrels(files.qrels);
  const Tokenizer tok(config);
  std::vector<Query> all_queries = train_queries;
  all_queries.insert(all_queries.end(), eval_queries.begin(), eval_queries.end());
  const auto data = tokenize_all(tok, docs, all_queries);
  const Bm25Index bm25(docs, tok);

  std::vector<std::string> skipped;
  auto examples = with_teacher(qrels, args.teachers, [&](const auto& teacher) {
    return build_training_set(train_queries, bm25, teacher, args.set, &skipped);
  });
  for (const auto& q : skipped) log << "warning: query " << q << " has fewer than " << args.set.n_docs << " candidates, skipped\n";
  fs::create_directories(args.out_dir);
  write_training_set(args.out_dir / "training_set.jsonl", examples);

  ModelPair<float> pair = start ? ModelPair<float>::from_checkpoint(*start)
                                : ModelPair<float>::create(config, {args.compressor, args.train.seed,
                                                                    args.init_checkpoint, {Projection::Q, Projection::V}});
  log << "training " << examples.size() << " examples, " << loss_mode_name(args.train.loss) << " loss, "
      << compressor_mode_name(pair.mode) << " compressor, from step " << pair.step << "\n";

  TrainHooks hooks;
  hooks.on_epoch_end = [&](std::size_t epoch) {
    const auto path = args.out_dir / ("epoch-" + std::to_string(epoch) + ".ckpt");
    save_checkpoint(path, pair.to_checkpoint());
    log << "epoch " << epoch << " done at step " << pair.step << ", wrote " << path.string() << "\n";
  };
  TrainOutcome out;
  out.log = train(pair, examples, data, args.train, hooks);
  write_file_atomic(args.out_dir / "loss.csv", format_loss_csv(out.log));
  out.final_checkpoint = args.out_dir / "final.ckpt";
  save_checkpoint(out.final_checkpoint, pair.to_checkpoint());

  if (args.evaluate && !eval_queries.empty()) {
    out.report = with_teacher(qrels, args.teachers, [&](const auto& teacher) {
      return evaluate_distillation(pair, args.train.loss, eval_queries, bm25, teacher, qrels, data, args.eval_pool,
                                   args.train.max_doc_len);
    });
    log << "held-out " << out.report->queries << " queries: kendall_tau " << fixed(out.report->kendall, 4)
        << ", ndcg@10 " << fixed(out.report->student_ndcg, 4) << " (teacher " << fixed(out.report->teacher_ndcg, 4)
        << ", first stage " << fixed(out.report->first_stage_ndcg, 4) << ")\n";
  }
  return out;
}

IndexBuildStats run_compress(const CompressArgs& args, std::ostream& log) {
  const auto pair = ModelPair<float>::from_checkpoint(load_checkpoint(args.checkpoint));
  const auto docs = read_corpus(args.corpus);
  const Tokenizer tok(pair.config());
  const auto stats = build_index(docs, pair.compressor, tok, {args.max_doc_len, args.dtype, args.threads}, args.out_index);
  const auto& c = pair.config();
  log << "indexed " << stats.docs << " docs into " << args.out_index.string() << " (" << stats.file_bytes
      << " bytes)\n"
      << "storage_estimate " << stats.payload_bytes << " bytes (" << stats.docs << " x " << c.mem_tokens << " x "
      << c.d_model << " x " << dtype_bytes(args.dtype) << ")\n"
      << "compression_factor " << fixed(compression_factor(args.max_doc_len, c.mem_tokens), 2) << "\n";
  return stats;
}

std::size_t run_rerank(const RerankArgs& args, std::ostream& log) {
  if (args.topk < 1) throw ConfigError("--topk must be at least 1");
  const auto pair = ModelPair<float>::from_checkpoint(load_checkpoint(args.checkpoint));
  const auto index = CompressedIndex::open(args.index);
  const auto& c = pair.config();
  if (index.header().l != c.mem_tokens || index.header().d_model != c.d_model) {
    throw ConfigError("index holds " + std::to_string(index.header().l) + "x" + std::to_string(index.header().d_model) +
                      " embeddings, checkpoint expects " + std::to_string(c.mem_tokens) + "x" +
                      std::to_string(c.d_model));
  }
  const auto docs = read_corpus(args.corpus);
  const auto queries = read_queries(args.queries);
  const Tokenizer tok(c);
  const Bm25Index bm25(docs, tok);
  std::vector<std::pair<std::string, ScoredCandidates>> results;
  for (const auto& q : queries) {
    const auto hits = bm25.retrieve(q.text, args.topk);
    if (hits.empty()) {
      log << "warning: query " << q.id << " matches no indexed term, skipped\n";
      continue;
    }
    std::vector<std::string> ids;
    for (const auto& h : hits) ids.push_back(h.doc_id);
    std::vector<CompressedDoc<float>> cands;
    for (auto& found : index.get_many(ids)) {
      if (found.doc) {
        cands.push_back(std::move(*found.doc));
      } else {
        log << "warning: query " << q.id << ": document " << found.doc_id << " not in index, dropped\n";
      }
    }
    if (cands.empty()) continue;
    const auto qt = tok.encode(q.text);
    results.emplace_back(q.id, args.scoring == LossMode::Listwise
                                   ? score_candidates(pair.reranker, qt, cands)
                                   : score_candidates_pointwise(pair.reranker, pair.head, qt, cands));
  }
  write_run(args.out_run, results, args.tag);
  log << "reranked " << results.size() << " queries into " << args.out_run.string() << "\n";
  return results.size();
}

EvalSummary run_eval(const EvalArgs& args, std::ostream& out, std::ostream& log) {
  const auto run = read_run(args.run);
  const auto qrels = read_qrels(args.qrels);
  const auto s = evaluate_run(run, qrels, args.k, args.gain);
  if (!s.run_orphans.empty()) {
    log << "warning: " << s.run_orphans.size() << " run queries have no judgments:";
    for (const auto& q : s.run_orphans) log << " " << q;
    log << "\n";
  }
  if (!s.qrels_orphans.empty()) {
    log << "warning: " << s.qrels_orphans.size() << " judged queries are missing from the run:";
    for (const auto& q : s.qrels_orphans) log << " " << q;
    log << "\n";
  }
  out << "ndcg@" << args.k << " " << fixed(100.0 * s.mean_ndcg, 2) << " (" << s.queries << " queries, "
      << gain_name(args.gain) << " gain)\n";
  return s;
}

LatencyReport run_bench(const BenchArgs& args, std::ostream& out, std::ostream& log) {
  const auto pair = ModelPair<float>::from_checkpoint(load_checkpoint(args.checkpoint));
  const auto index = CompressedIndex::open(args.index);
  const auto docs = read_corpus(args.corpus);
  const auto queries = read_queries(args.queries);
  const Tokenizer tok(pair.config());
  const Bm25Index bm25(docs, tok);
  const auto data = tokenize_all(tok, docs, queries);

  std::vector<BenchQuery> bq;
  for (const auto& q : queries) {
    if (bq.size() == args.options.queries) break;
    const auto hits = bm25.retrieve(q.text, args.k);
    if (hits.size() < args.k) continue;
    BenchQuery b{data.query(q.id), {}};
    for (const auto& h : hits) b.candidates.push_back(h.doc_id);
    bq.push_back(std::move(b));
  }
  if (bq.empty()) throw ConfigError("no query has " + std::to_string(args.k) + " candidates to bench");
  BenchOptions opts = args.options;
  opts.queries = bq.size();

  auto doc_tokens = [&data](const std::string& id) -> const std::vector<TokenId>& { return data.doc(id); };
  std::vector<BenchSystem> systems;
  for (const auto& name : args.systems) {
    if (name == "compressed_listwise") {
      systems.push_back(compressed_listwise_system(name, pair.reranker, index, bq));
    } else if (name == "pointwise_textual") {
      systems.push_back(textual_pointwise_system(name, pair.reranker, pair.head, bq, doc_tokens, args.doc_len));
    } else if (name == "textual_listwise") {
      systems.push_back(textual_listwise_system(name, pair.reranker, bq, doc_tokens, args.doc_len));
    } else {
      throw ConfigError("unknown bench system '" + name +
                        "' (compressed_listwise|pointwise_textual|textual_listwise)");
    }
  }
  const auto report = bench_latency(systems, opts);
  for (const auto& t : report.systems) {
    if (t.failure) log << "warning: " << t.name << " failed: " << *t.failure << "\n";
    else if (t.mode == SeqMode::CompressedListwise)
      log << t.name << " embedding fetch share " << fixed(100.0 * t.fetch_share, 1) << "%\n";
  }
  const auto csv = format_bench_csv(report);
  if (args.out_csv) write_file_atomic(*args.out_csv, csv);
  out << csv;
  return report;
}

}  // namespace rrk
