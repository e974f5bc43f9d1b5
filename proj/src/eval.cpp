#include "rrk/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "rrk/fileio.hpp"

namespace rrk {
namespace {

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t lineno = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++lineno;
    f(text.substr(start, end - start), lineno);
    start = end + 1;
  }
}

[[noreturn]] void bad_line(const char* what, std::size_t lineno, std::string_view line,
                           const std::string& why) {
  throw FormatError(std::string(what) + " line " + std::to_string(lineno) + ": " + why + " in '" +
                    std::string(line) + "'");
}

bool parse_int(std::string_view s, long long& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

double gain_of(int rel, Gain g) {
  return g == Gain::Exponential ? std::exp2(static_cast<double>(rel)) - 1.0 : rel;
}

}  // namespace

int grade(const Qrels& qrels, const std::string& qid, const std::string& doc_id) {
  auto q = qrels.find(qid);
  if (q == qrels.end()) return 0;
  auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

Qrels parse_qrels(std::string_view text) {
  Qrels out;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    auto f = fields(line);
    if (f.empty()) return;
    if (f.size() != 4) bad_line("qrels", lineno, line, "expected 4 fields");
    long long rel = 0;
    if (!parse_int(f[3], rel) || rel < 0) bad_line("qrels", lineno, line, "grade must be an integer >= 0");
    out[std::string(f[0])][std::string(f[2])] = static_cast<int>(rel);
  });
  return out;
}

Qrels read_qrels(const std::filesystem::path& path) { return parse_qrels(read_file(path)); }

std::string format_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [qid, docs] : qrels)
    for (const auto& [doc, rel] : docs) out += qid + " 0 " + doc + " " + std::to_string(rel) + "\n";
  return out;
}

std::string format_run(const std::vector<std::pair<std::string, ScoredCandidates>>& results,
                       const std::string& tag) {
  std::string out;
  char buf[64];
  for (const auto& [qid, scored] : results) {
    int r = 0;
    for (auto i : rank_indices(scored)) {
      std::snprintf(buf, sizeof buf, "%.6f", scored.scores[i]);
      out += qid + " Q0 " + scored.doc_ids[i] + " " + std::to_string(++r) + " " + buf + " " + tag + "\n";
    }
  }
  return out;
}

void write_run(const std::filesystem::path& path,
               const std::vector<std::pair<std::string, ScoredCandidates>>& results,
               const std::string& tag) {
  write_file_atomic(path, format_run(results, tag));
}

Run parse_run(std::string_view text) {
  Run run;
  for_each_line(text, [&](std::string_view line, std::size_t lineno) {
    auto f = fields(line);
    if (f.empty()) return;
    if (f.size() != 6) bad_line("run", lineno, line, "expected 6 fields");
    long long rank = 0;
    double score = 0;
    if (!parse_int(f[3], rank)) bad_line("run", lineno, line, "rank is not an integer");
    if (!parse_double(f[4], score)) bad_line("run", lineno, line, "score is not a number");
    const std::string qid(f[0]);
    if (run.empty() || run.back().first != qid) {
      for (const auto& [seen, _] : run)
        if (seen == qid) bad_line("run", lineno, line, "query " + qid + " is not contiguous");
      run.emplace_back(qid, std::vector<RunEntry>{});
    }
    auto& entries = run.back().second;
    if (rank != static_cast<long long>(entries.size()) + 1) {
      bad_line("run", lineno, line, "expected rank " + std::to_string(entries.size() + 1));
    }
    if (!entries.empty() && score > entries.back().score) {
      bad_line("run", lineno, line, "score increases with rank");
    }
    entries.push_back({std::string(f[2]), static_cast<int>(rank), score});
  });
  return run;
}

Run read_run(const std::filesystem::path& path) { return parse_run(read_file(path)); }

Gain parse_gain(const std::string& s) {
  if (s == "exp" || s == "exponential") return Gain::Exponential;
  if (s == "lin" || s == "linear") return Gain::Linear;
  throw ConfigError("unknown gain '" + s + "' (exp|lin)");
}

const char* gain_name(Gain g) { return g == Gain::Exponential ? "exp" : "lin"; }

double ndcg_at_k(const std::vector<std::string>& ranking, const std::map<std::string, int>& judged,
                 std::size_t k, Gain gain) {
  if (k < 1) throw ContractError("ndcg cutoff must be at least 1");
  double dcg = 0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    auto it = judged.find(ranking[i]);
    if (it != judged.end()) dcg += gain_of(it->second, gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [_, rel] : judged) grades.push_back(rel);
  std::sort(grades.begin(), grades.end(), std::greater<>());
  double idcg = 0;
  for (std::size_t i = 0; i < grades.size() && i < k; ++i)
    idcg += gain_of(grades[i], gain) / std::log2(static_cast<double>(i) + 2.0);
  return idcg > 0 ? dcg / idcg : 0.0;
}

double kendall_tau(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw ContractError("kendall_tau over lists of " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
  }
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const double x = a[i] - a[j], y = b[i] - b[j];
      if (x == 0 || y == 0) continue;
      ((x > 0) == (y > 0) ? concordant : discordant)++;
    }
  }
  const auto n = concordant + discordant;
  return n ? static_cast<double>(concordant - discordant) / static_cast<double>(n) : 0.0;
}

EvalSummary evaluate_run(const Run& run, const Qrels& qrels, std::size_t k, Gain gain) {
  EvalSummary s;
  std::set<std::string> in_run;
  double total = 0;
  for (const auto& [qid, entries] : run) {
    in_run.insert(qid);
    auto q = qrels.find(qid);
    if (q == qrels.end()) {
      s.run_orphans.push_back(qid);
      continue;
    }
    std::vector<std::string> ranking;
    for (const auto& e : entries) ranking.push_back(e.doc_id);
    total += ndcg_at_k(ranking, q->second, k, gain);
    ++s.queries;
  }
  for (const auto& [qid, _] : qrels)
    if (!in_run.count(qid)) s.qrels_orphans.push_back(qid);
  s.mean_ndcg = s.queries ? total / static_cast<double>(s.queries) : 0.0;
  return s;
}

SeqMode parse_seq_mode(const std::string& s) {
  if (s == "compressed_listwise") return SeqMode::CompressedListwise;
  if (s == "textual_listwise") return SeqMode::TextualListwise;
  if (s == "pointwise_compressed") return SeqMode::PointwiseCompressed;
  if (s == "pointwise_textual") return SeqMode::PointwiseTextual;
  throw ConfigError("unknown sequence mode '" + s + "'");
}

const char* seq_mode_name(SeqMode m) {
  switch (m) {
    case SeqMode::CompressedListwise:
      return "compressed_listwise";
    case SeqMode::TextualListwise:
      return "textual_listwise";
    case SeqMode::PointwiseCompressed:
      return "pointwise_compressed";
    case SeqMode::PointwiseTextual:
      return "pointwise_textual";
  }
  return "?";
}

std::uint64_t seq_len(SeqMode mode, std::uint64_t q, std::uint64_t k, std::uint64_t l_or_d) {
  switch (mode) {
    case SeqMode::CompressedListwise:
      return 2 * q + k * (l_or_d + 1);
    case SeqMode::TextualListwise:
      return q + k * l_or_d;
    case SeqMode::PointwiseCompressed:
    case SeqMode::PointwiseTextual:
      return q + l_or_d + 1;
  }
  throw ConfigError("unknown sequence mode");
}

std::uint64_t passes(SeqMode mode, std::uint64_t k) {
  return mode == SeqMode::PointwiseCompressed || mode == SeqMode::PointwiseTextual ? k : 1;
}

double attention_cost(SeqMode mode, std::uint64_t q, std::uint64_t k, std::uint64_t l_or_d) {
  const double n = static_cast<double>(seq_len(mode, q, k, l_or_d));
  return static_cast<double>(passes(mode, k)) * n * n;
}

}  // namespace rrk
