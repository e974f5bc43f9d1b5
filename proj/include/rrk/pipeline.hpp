#pragma once

#include <string>
#include <vector>

#include "rrk/train.hpp"

namespace rrk {

std::vector<CompressedDoc<float>> compress_docs(const Transformer<float>& compressor,
                                                const std::vector<std::string>& ids, const TokenStore& data,
                                                std::size_t max_doc_len);

/// Listwise cosine scores in candidate order.
ScoredCandidates score_candidates(const Transformer<float>& reranker, const std::vector<TokenId>& query,
                                  const std::vector<CompressedDoc<float>>& docs);

/// One pointwise pass per candidate.
ScoredCandidates score_candidates_pointwise(const Transformer<float>& reranker,
                                            const PointwiseHead<float>& head, const std::vector<TokenId>& query,
                                            const std::vector<CompressedDoc<float>>& docs);

struct DistillReport {
  double kendall = 0;        // student vs teacher over each pool
  double student_ndcg = 0;
  double teacher_ndcg = 0;
  double first_stage_ndcg = 0;
  std::size_t queries = 0;
};

/// Reranks the first-stage top `pool` of each query and compares with the
/// teacher on the same pool.
template <typename TeacherT>
DistillReport evaluate_distillation(const ModelPair<float>& pair, LossMode mode, const std::vector<Query>& queries,
                                    const Bm25Index& retriever, const TeacherT& teacher, const Qrels& qrels,
                                    const TokenStore& data, std::size_t pool, std::size_t max_doc_len,
                                    std::size_t k = 10, Gain gain = Gain::Exponential);

}  // namespace rrk
