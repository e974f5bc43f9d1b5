#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rrk/eval.hpp"
#include "rrk/index.hpp"
#include "rrk/model_pair.hpp"

namespace rrk {

/// One configured reranker. `run(i)` reranks query i and returns the seconds
/// spent fetching document embeddings (0 when nothing is fetched).
struct BenchSystem {
  std::string name;
  SeqMode mode = SeqMode::CompressedListwise;
  std::uint64_t q_len = 0;
  std::uint64_t k = 0;
  std::uint64_t l_or_d = 0;
  std::function<double(std::size_t)> run;
};

struct BenchOptions {
  std::size_t queries = 10;
  std::size_t repeats = 5;
  std::size_t warmup = 1;
};

struct SystemTiming {
  std::string name;
  SeqMode mode = SeqMode::CompressedListwise;
  std::uint64_t q_len = 0, k = 0, l_or_d = 0, seq_len = 0;
  std::size_t queries = 0;
  std::size_t batch = 1;
  double mean_s_per_q = 0;  // median over repeats of the per-query mean
  std::vector<double> repeat_s_per_q;
  double fetch_share = 0;
  std::optional<double> ratio;  // vs the compressed listwise baseline
  std::optional<std::string> failure;
};

struct LatencyReport {
  std::vector<SystemTiming> systems;
  std::optional<std::size_t> baseline;  // index of the compressed listwise system
  /// Set when a self-comparison differs from 1 by more than this fraction.
  double noise_tolerance = 0.2;
};

/// Times every system query by query, single-threaded. The first compressed
/// listwise system is the baseline. A throwing system is recorded with its
/// failure and the others still run. Throws ContractError if repeats < 3 or
/// warmup < 1.
LatencyReport bench_latency(const std::vector<BenchSystem>& systems, const BenchOptions& options);

/// "system,mode,|q|,k,l_or_d,seq_len,mean_s_per_q,ratio"; failed systems get
/// empty timing columns.
std::string format_bench_csv(const LatencyReport& report);

struct BenchQuery {
  std::vector<TokenId> query;
  std::vector<std::string> candidates;
};

/// Compressed listwise reranking over embeddings fetched from `index`.
BenchSystem compressed_listwise_system(std::string name, const Transformer<float>& reranker,
                                       const CompressedIndex& index, const std::vector<BenchQuery>& queries);

/// Textual pointwise reranking: k passes over (q; d; SEP), documents padded or
/// cut to exactly d_len tokens by cycling their own tokens.
BenchSystem textual_pointwise_system(std::string name, const Transformer<float>& reranker,
                                     const PointwiseHead<float>& head, const std::vector<BenchQuery>& queries,
                                     const std::function<const std::vector<TokenId>&(const std::string&)>& doc_tokens,
                                     std::size_t d_len);

/// Textual listwise reranking: one pass over (q; d_1 .. d_k), each document
/// scored by the cosine of its last hidden state with the final one.
BenchSystem textual_listwise_system(std::string name, const Transformer<float>& reranker,
                                    const std::vector<BenchQuery>& queries,
                                    const std::function<const std::vector<TokenId>&(const std::string&)>& doc_tokens,
                                    std::size_t d_len);

std::vector<TokenId> fit_length(const std::vector<TokenId>& tokens, std::size_t n);

}  // namespace rrk
