#include "rrk/pipeline.hpp"

namespace rrk {

std::vector<CompressedDoc<float>> compress_docs(const Transformer<float>& compressor,
                                                const std::vector<std::string>& ids, const TokenStore& data,
                                                std::size_t max_doc_len) {
  std::vector<CompressedDoc<float>> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(compress(compressor, id, data.doc(id), max_doc_len));
  return out;
}

ScoredCandidates score_candidates(const Transformer<float>& reranker, const std::vector<TokenId>& query,
                                  const std::vector<CompressedDoc<float>>& docs) {
  Graph<float> g(false);
  const auto input = build_listwise_input(reranker.config(), query, docs);
  const auto scores = score_listwise(g, reranker, input);
  ScoredCandidates out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out.doc_ids.push_back(docs[i].doc_id);
    out.scores.push_back(scores.data()[i]);
  }
  return out;
}

ScoredCandidates score_candidates_pointwise(const Transformer<float>& reranker,
                                            const PointwiseHead<float>& head, const std::vector<TokenId>& query,
                                            const std::vector<CompressedDoc<float>>& docs) {
  ScoredCandidates out;
  for (const auto& d : docs) {
    Graph<float> g(false);
    out.doc_ids.push_back(d.doc_id);
    out.scores.push_back(pointwise_score(g, reranker, head, query, d).item());
  }
  return out;
}

template <typename TeacherT>
DistillReport evaluate_distillation(const ModelPair<float>& pair, LossMode mode, const std::vector<Query>& queries,
                                    const Bm25Index& retriever, const TeacherT& teacher, const Qrels& qrels,
                                    const TokenStore& data, std::size_t pool, std::size_t max_doc_len,
                                    std::size_t k, Gain gain) {
  static const std::map<std::string, int> kNone;
  DistillReport r;
  for (const auto& q : queries) {
    const auto hits = retriever.retrieve(q.text, pool);
    if (hits.empty()) continue;
    std::vector<std::string> ids;
    for (const auto& h : hits) ids.push_back(h.doc_id);
    const auto docs = compress_docs(pair.compressor, ids, data, max_doc_len);
    const auto& qt = data.query(q.id);
    const auto student = mode == LossMode::Listwise ? score_candidates(pair.reranker, qt, docs)
                                                    : score_candidates_pointwise(pair.reranker, pair.head, qt, docs);
    ScoredCandidates t{ids, {}};
    for (const auto& id : ids) t.scores.push_back(teacher.score(q.id, id));
    auto judged_it = qrels.find(q.id);
    const auto& judged = judged_it == qrels.end() ? kNone : judged_it->second;
    r.kendall += kendall_tau(student.scores, t.scores);
    r.student_ndcg += ndcg_at_k(rank(student), judged, k, gain);
    r.teacher_ndcg += ndcg_at_k(rank(t), judged, k, gain);
    r.first_stage_ndcg += ndcg_at_k(ids, judged, k, gain);
    ++r.queries;
  }
  if (r.queries) {
    const double n = static_cast<double>(r.queries);
    r.kendall /= n;
    r.student_ndcg /= n;
    r.teacher_ndcg /= n;
    r.first_stage_ndcg /= n;
  }
  return r;
}

template DistillReport evaluate_distillation(const ModelPair<float>&, LossMode, const std::vector<Query>&,
                                             const Bm25Index&, const Teacher&, const Qrels&, const TokenStore&,
                                             std::size_t, std::size_t, std::size_t, Gain);
template DistillReport evaluate_distillation(const ModelPair<float>&, LossMode, const std::vector<Query>&,
                                             const Bm25Index&, const MixedTeacher&, const Qrels&,
                                             const TokenStore&, std::size_t, std::size_t, std::size_t, Gain);

}  // namespace rrk
