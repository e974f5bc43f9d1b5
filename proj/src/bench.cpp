#include "rrk/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include "rrk/error.hpp"
#include "rrk/reranker.hpp"

namespace rrk {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LatencyReport bench_latency(const std::vector<BenchSystem>& systems, const BenchOptions& options) {
  if (options.repeats < 3) throw ContractError("bench needs at least 3 repeats");
  if (options.warmup < 1) throw ContractError("bench needs at least 1 warmup pass");
  if (options.queries < 1) throw ContractError("bench needs at least 1 query");
  LatencyReport report;
  for (const auto& sys : systems) {
    SystemTiming t;
    t.name = sys.name;
    t.mode = sys.mode;
    t.q_len = sys.q_len;
    t.k = sys.k;
    t.l_or_d = sys.l_or_d;
    t.seq_len = seq_len(sys.mode, sys.q_len, sys.k, sys.l_or_d);
    t.queries = options.queries;
    try {
      for (std::size_t w = 0; w < options.warmup; ++w)
        for (std::size_t i = 0; i < options.queries; ++i) sys.run(i);
      double fetch = 0, total = 0;
      for (std::size_t r = 0; r < options.repeats; ++r) {
        const auto t0 = Clock::now();
        for (std::size_t i = 0; i < options.queries; ++i) fetch += sys.run(i);
        const double s = seconds_since(t0);
        total += s;
        t.repeat_s_per_q.push_back(s / static_cast<double>(options.queries));
      }
      t.mean_s_per_q = median(t.repeat_s_per_q);
      t.fetch_share = total > 0 ? fetch / total : 0;
    } catch (const std::exception& e) {
      t.failure = e.what();
    }
    if (!report.baseline && !t.failure && sys.mode == SeqMode::CompressedListwise) {
      report.baseline = report.systems.size();
    }
    report.systems.push_back(std::move(t));
  }
  if (report.baseline) {
    const double base = report.systems[*report.baseline].mean_s_per_q;
    for (auto& t : report.systems)
      if (!t.failure && base > 0) t.ratio = t.mean_s_per_q / base;
  }
  return report;
}

std::string format_bench_csv(const LatencyReport& report) {
  std::string out = "system,mode,|q|,k,l_or_d,seq_len,mean_s_per_q,ratio\n";
  char buf[64];
  for (const auto& t : report.systems) {
    out += t.name + "," + seq_mode_name(t.mode) + "," + std::to_string(t.q_len) + "," + std::to_string(t.k) +
           "," + std::to_string(t.l_or_d) + "," + std::to_string(t.seq_len) + ",";
    if (!t.failure) {
      std::snprintf(buf, sizeof buf, "%.6g", t.mean_s_per_q);
      out += buf;
    }
    out += ",";
    if (t.ratio) {
      std::snprintf(buf, sizeof buf, "%.4f", *t.ratio);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::vector<TokenId> fit_length(const std::vector<TokenId>& tokens, std::size_t n) {
  if (tokens.empty()) throw EmptyDocumentError("cannot stretch an empty document");
  std::vector<TokenId> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = tokens[i % tokens.size()];
  return out;
}

BenchSystem compressed_listwise_system(std::string name, const Transformer<float>& reranker,
                                       const CompressedIndex& index, const std::vector<BenchQuery>& queries) {
  BenchSystem sys;
  sys.name = std::move(name);
  sys.mode = SeqMode::CompressedListwise;
  sys.q_len = queries.empty() ? 0 : queries.front().query.size();
  sys.k = queries.empty() ? 0 : queries.front().candidates.size();
  sys.l_or_d = index.header().l;
  sys.run = [&reranker, &index, &queries](std::size_t i) {
    const auto& q = queries[i % queries.size()];
    const auto t0 = Clock::now();
    std::vector<CompressedDoc<float>> docs;
    for (auto& hit : index.get_many(q.candidates)) {
      if (!hit.doc) throw FormatError("document " + hit.doc_id + " missing from index");
      docs.push_back(std::move(*hit.doc));
    }
    const double fetch = seconds_since(t0);
    Graph<float> g(false);
    score_listwise(g, reranker, build_listwise_input(reranker.config(), q.query, docs));
    return fetch;
  };
  return sys;
}

BenchSystem textual_pointwise_system(std::string name, const Transformer<float>& reranker,
                                     const PointwiseHead<float>& head, const std::vector<BenchQuery>& queries,
                                     const std::function<const std::vector<TokenId>&(const std::string&)>& doc_tokens,
                                     std::size_t d_len) {
  BenchSystem sys;
  sys.name = std::move(name);
  sys.mode = SeqMode::PointwiseTextual;
  sys.q_len = queries.empty() ? 0 : queries.front().query.size();
  sys.k = queries.empty() ? 0 : queries.front().candidates.size();
  sys.l_or_d = d_len;
  sys.run = [&reranker, &head, &queries, doc_tokens, d_len](std::size_t i) {
    const auto& q = queries[i % queries.size()];
    for (const auto& id : q.candidates) {
      Graph<float> g(false);
      pointwise_text_score(g, reranker, head, q.query, fit_length(doc_tokens(id), d_len));
    }
    return 0.0;
  };
  return sys;
}

BenchSystem textual_listwise_system(std::string name, const Transformer<float>& reranker,
                                    const std::vector<BenchQuery>& queries,
                                    const std::function<const std::vector<TokenId>&(const std::string&)>& doc_tokens,
                                    std::size_t d_len) {
  BenchSystem sys;
  sys.name = std::move(name);
  sys.mode = SeqMode::TextualListwise;
  sys.q_len = queries.empty() ? 0 : queries.front().query.size();
  sys.k = queries.empty() ? 0 : queries.front().candidates.size();
  sys.l_or_d = d_len;
  sys.run = [&reranker, &queries, doc_tokens, d_len](std::size_t i) {
    const auto& q = queries[i % queries.size()];
    std::vector<TokenId> input = q.query;
    std::vector<std::size_t> ends;
    for (const auto& id : q.candidates) {
      const auto d = fit_length(doc_tokens(id), d_len);
      input.insert(input.end(), d.begin(), d.end());
      ends.push_back(input.size() - 1);
    }
    Graph<float> g(false);
    const auto hidden = reranker.forward_tokens(g, input);
    const auto last = ad::row(g, hidden, hidden.rows() - 1);
    for (auto e : ends) ad::cosine(g, last, ad::row(g, hidden, e));
    return 0.0;
  };
  return sys;
}

}  // namespace rrk
