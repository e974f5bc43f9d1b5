#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rrk/reranker.hpp"

namespace rrk {

/// qid -> doc_id -> grade. Pairs not present have grade 0.
using Qrels = std::map<std::string, std::map<std::string, int>>;

int grade(const Qrels& qrels, const std::string& qid, const std::string& doc_id);

/// Whitespace separated "qid 0 docid rel"; throws FormatError with the line number.
Qrels parse_qrels(std::string_view text);
Qrels read_qrels(const std::filesystem::path& path);
std::string format_qrels(const Qrels& qrels);

struct RunEntry {
  std::string doc_id;
  int rank = 0;
  double score = 0;
};

/// Queries in file order, entries in rank order.
using Run = std::vector<std::pair<std::string, std::vector<RunEntry>>>;

/// "qid Q0 docid rank score tag" lines, ranks assigned by rank().
std::string format_run(const std::vector<std::pair<std::string, ScoredCandidates>>& results,
                       const std::string& tag);
void write_run(const std::filesystem::path& path,
               const std::vector<std::pair<std::string, ScoredCandidates>>& results,
               const std::string& tag);
/// Throws FormatError on malformed lines, non-contiguous ranks or scores that
/// increase with rank.
Run parse_run(std::string_view text);
Run read_run(const std::filesystem::path& path);

enum class Gain { Exponential, Linear };
Gain parse_gain(const std::string& s);
const char* gain_name(Gain g);

/// DCG@k / IDCG@k where the ideal ordering comes from every judged document
/// of the query. 0 when IDCG is 0.
double ndcg_at_k(const std::vector<std::string>& ranking, const std::map<std::string, int>& judged,
                 std::size_t k = 10, Gain gain = Gain::Exponential);

/// Pairs tied in either list are skipped; (concordant - discordant) / counted.
/// 0 when no pair is counted.
double kendall_tau(const std::vector<double>& a, const std::vector<double>& b);

struct EvalSummary {
  double mean_ndcg = 0;
  std::size_t queries = 0;
  std::vector<std::string> run_orphans;    // in run, not in qrels
  std::vector<std::string> qrels_orphans;  // in qrels, not in run
};

/// Averages over run queries that have judgments.
EvalSummary evaluate_run(const Run& run, const Qrels& qrels, std::size_t k, Gain gain);

enum class SeqMode { CompressedListwise, TextualListwise, PointwiseCompressed, PointwiseTextual };
SeqMode parse_seq_mode(const std::string& s);
const char* seq_mode_name(SeqMode m);

/// Length of one forward pass:
///   compressed_listwise   2|q| + k(l+1)
///   textual_listwise      |q| + k|d|
///   pointwise_compressed  |q| + l + 1, once per candidate
///   pointwise_textual     |q| + |d| + 1, once per candidate
std::uint64_t seq_len(SeqMode mode, std::uint64_t q, std::uint64_t k, std::uint64_t l_or_d);
/// Forward passes per query: 1 for listwise, k for pointwise.
std::uint64_t passes(SeqMode mode, std::uint64_t k);
/// passes * seq_len^2.
double attention_cost(SeqMode mode, std::uint64_t q, std::uint64_t k, std::uint64_t l_or_d);

}  // namespace rrk
