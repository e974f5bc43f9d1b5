#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rrk/eval.hpp"
#include "rrk/tokenizer.hpp"

namespace rrk {

struct Document {
  std::string id;
  std::string text;
};

struct Query {
  std::string id;
  std::string text;
};

/// Planted-relevance generator. Each document belongs to one topic and takes
/// one value per facet, each rendered as one of `forms` surface words; a query
/// names a topic and one value per facet. rel = number of matching facet
/// values when the topic matches, else 0.
struct CorpusSpec {
  std::size_t docs = 2000;
  std::size_t train_queries = 200;
  std::size_t eval_queries = 50;
  std::size_t topics = 40;
  std::size_t facets = 3;
  std::size_t values = 2;
  std::size_t forms = 3;
  std::size_t filler_words = 40;
  std::size_t min_filler = 3;
  std::size_t max_filler = 8;
  std::uint64_t seed = 0;
};

struct ToyCorpus {
  std::vector<Document> docs;
  std::vector<Query> train_queries;
  std::vector<Query> eval_queries;
  Qrels qrels;
};

/// Words are distinct and map to distinct ids under the tokenizer.
ToyCorpus generate_corpus(const CorpusSpec& spec, const Tokenizer& tokenizer);

/// {"id", "text"} per line.
std::string format_corpus_jsonl(const std::vector<Document>& docs);
std::vector<Document> parse_corpus_jsonl(std::string_view text);
std::vector<Document> read_corpus(const std::filesystem::path& path);

/// "qid\ttext" per line.
std::string format_queries_tsv(const std::vector<Query>& queries);
std::vector<Query> parse_queries_tsv(std::string_view text);
std::vector<Query> read_queries(const std::filesystem::path& path);

/// Writes corpus.jsonl, train_queries.tsv, eval_queries.tsv and qrels.txt.
void write_corpus_dir(const std::filesystem::path& dir, const ToyCorpus& corpus);

}  // namespace rrk
