#include "rrk/corpus.hpp"

#include <cstdio>
#include <json.hpp>
#include <set>
#include <unordered_set>

#include "rrk/fileio.hpp"
#include "rrk/rng.hpp"

namespace rrk {
namespace {

constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ru", "te", "sa", "po", "ne",
                                      "vi", "do", "ga", "zu", "be", "fa", "hi", "jo"};

class WordMaker {
 public:
  WordMaker(Rng& rng, const Tokenizer& tok) : rng_(rng), tok_(tok) {}

  std::string next() {
    for (;;) {
      std::string w;
      for (int i = 0; i < 3; ++i) w += kSyllables[rng_.uniform_index(std::size(kSyllables))];
      if (words_.count(w) || ids_.count(tok_.id_of(w))) continue;
      words_.insert(w);
      ids_.insert(tok_.id_of(w));
      return w;
    }
  }

 private:
  Rng& rng_;
  const Tokenizer& tok_;
  std::unordered_set<std::string> words_;
  std::unordered_set<TokenId> ids_;
};

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string numbered(char prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t lineno = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) f(line, lineno);
    start = end + 1;
  }
}

}  // namespace

ToyCorpus generate_corpus(const CorpusSpec& spec, const Tokenizer& tokenizer) {
  if (spec.docs == 0) throw ConfigError("corpus needs at least one document");
  if (spec.topics == 0 || spec.facets == 0 || spec.values == 0 || spec.forms == 0) {
    throw ConfigError("topics, facets, values and forms must be positive");
  }
  if (spec.min_filler > spec.max_filler) throw ConfigError("min_filler exceeds max_filler");
  if (spec.filler_words == 0 && spec.max_filler > 0) throw ConfigError("filler needs a word list");
  Rng rng(spec.seed);
  WordMaker maker(rng, tokenizer);

  std::vector<std::string> topics(spec.topics);
  for (auto& t : topics) t = maker.next();
  // forms[f][v][s]
  std::vector<std::vector<std::vector<std::string>>> forms(
      spec.facets, std::vector<std::vector<std::string>>(spec.values, std::vector<std::string>(spec.forms)));
  for (auto& f : forms)
    for (auto& v : f)
      for (auto& s : v) s = maker.next();
  std::vector<std::string> filler(spec.filler_words);
  for (auto& w : filler) w = maker.next();

  ToyCorpus out;
  struct Planted {
    std::size_t topic;
    std::vector<std::size_t> values;
  };
  std::vector<Planted> doc_truth;
  const int doc_width = static_cast<int>(std::to_string(spec.docs - 1).size());
  for (std::size_t i = 0; i < spec.docs; ++i) {
    Planted p{i % spec.topics, {}};
    std::vector<std::string> words{topics[p.topic], topics[p.topic]};
    for (std::size_t f = 0; f < spec.facets; ++f) {
      p.values.push_back(rng.uniform_index(spec.values));
      words.push_back(forms[f][p.values.back()][rng.uniform_index(spec.forms)]);
    }
    const auto n_fill = spec.min_filler + rng.uniform_index(spec.max_filler - spec.min_filler + 1);
    for (std::size_t j = 0; j < n_fill; ++j) words.push_back(filler[rng.uniform_index(filler.size())]);
    rng.shuffle(words);
    out.docs.push_back({numbered('d', i, doc_width), join(words)});
    doc_truth.push_back(std::move(p));
  }

  const std::size_t total_q = spec.train_queries + spec.eval_queries;
  const int q_width = static_cast<int>(std::to_string(total_q).size());
  std::set<std::string> seen;
  for (std::size_t attempts = 0; out.train_queries.size() + out.eval_queries.size() < total_q; ++attempts) {
    if (attempts > 1000 * (total_q + 1)) throw ConfigError("corpus spec admits too few distinct queries");
    Planted p{rng.uniform_index(spec.topics), {}};
    std::vector<std::string> words{topics[p.topic]};
    for (std::size_t f = 0; f < spec.facets; ++f) {
      p.values.push_back(rng.uniform_index(spec.values));
      words.push_back(forms[f][p.values.back()][rng.uniform_index(spec.forms)]);
    }
    rng.shuffle(words);
    auto text = join(words);
    if (!seen.insert(text).second) continue;
    const std::size_t n = out.train_queries.size() + out.eval_queries.size();
    Query q{numbered('q', n + 1, q_width), text};
    for (std::size_t d = 0; d < spec.docs; ++d) {
      if (doc_truth[d].topic != p.topic) continue;
      int rel = 0;
      for (std::size_t f = 0; f < spec.facets; ++f) rel += doc_truth[d].values[f] == p.values[f];
      if (rel > 0) out.qrels[q.id][out.docs[d].id] = rel;
    }
    (n < spec.train_queries ? out.train_queries : out.eval_queries).push_back(std::move(q));
  }
  return out;
}

std::string format_corpus_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["text"] = d.text;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<Document> parse_corpus_jsonl(std::string_view text) {
  std::vector<Document> docs;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    try {
      auto j = nlohmann::json::parse(line);
      docs.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  });
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path) {
  return parse_corpus_jsonl(read_file(path));
}

std::string format_queries_tsv(const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) out += q.id + "\t" + q.text + "\n";
  return out;
}

std::vector<Query> parse_queries_tsv(std::string_view text) {
  std::vector<Query> out;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw FormatError("queries line " + std::to_string(lineno) + ": expected 'qid<TAB>text'");
    }
    out.push_back({std::string(line.substr(0, tab)), std::string(line.substr(tab + 1))});
  });
  return out;
}

std::vector<Query> read_queries(const std::filesystem::path& path) {
  return parse_queries_tsv(read_file(path));
}

void write_corpus_dir(const std::filesystem::path& dir, const ToyCorpus& corpus) {
  write_file_atomic(dir / "corpus.jsonl", format_corpus_jsonl(corpus.docs));
  write_file_atomic(dir / "train_queries.tsv", format_queries_tsv(corpus.train_queries));
  write_file_atomic(dir / "eval_queries.tsv", format_queries_tsv(corpus.eval_queries));
  write_file_atomic(dir / "qrels.txt", format_qrels(corpus.qrels));
}

}  // namespace rrk
