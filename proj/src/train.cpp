#include "rrk/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rrk/optim.hpp"

namespace rrk {

LossMode parse_loss_mode(const std::string& s) {
  if (s == "listwise") return LossMode::Listwise;
  if (s == "pointwise") return LossMode::Pointwise;
  throw ConfigError("unknown loss mode '" + s + "' (listwise|pointwise)");
}

const char* loss_mode_name(LossMode m) { return m == LossMode::Listwise ? "listwise" : "pointwise"; }

const std::vector<TokenId>& TokenStore::doc(const std::string& id) const {
  auto it = docs.find(id);
  if (it == docs.end()) throw FormatError("unknown document id " + id);
  return it->second;
}

const std::vector<TokenId>& TokenStore::query(const std::string& id) const {
  auto it = queries.find(id);
  if (it == queries.end()) throw FormatError("unknown query id " + id);
  return it->second;
}

TokenStore tokenize_all(const Tokenizer& tok, const std::vector<Document>& docs,
                        const std::vector<Query>& queries) {
  TokenStore s;
  for (const auto& d : docs) {
    if (!s.docs.emplace(d.id, tok.encode(d.text)).second) throw IdError("duplicate document id " + d.id);
  }
  for (const auto& q : queries) {
    if (!s.queries.emplace(q.id, tok.encode(q.text)).second) throw IdError("duplicate query id " + q.id);
  }
  return s;
}

template <typename T>
Tensor<T> example_loss(Graph<T>& g, const ModelPair<T>& pair, const TrainingExample& ex,
                       const TokenStore& data, const TrainOptions& options) {
  const auto& q = data.query(ex.qid);
  std::vector<CompressedDoc<T>> docs;
  docs.reserve(ex.docs.size());
  for (const auto& id : ex.docs) docs.push_back(compress(g, pair.compressor, id, data.doc(id), options.max_doc_len));
  if (options.loss == LossMode::Listwise) {
    const auto input = build_listwise_input(pair.config(), q, docs);
    const auto scores = score_listwise(g, pair.reranker, input);
    return ad::ranknet_loss(g, scores, preference_pairs(ex.teacher_scores), static_cast<T>(options.tau));
  }
  std::vector<Tensor<T>> scores;
  for (const auto& d : docs) scores.push_back(pointwise_score(g, pair.reranker, pair.head, q, d));
  std::vector<T> target(ex.teacher_scores.begin(), ex.teacher_scores.end());
  return ad::mse_loss(g, ad::stack(g, scores), target);
}

template Tensor<float> example_loss(Graph<float>&, const ModelPair<float>&, const TrainingExample&,
                                    const TokenStore&, const TrainOptions&);
template Tensor<double> example_loss(Graph<double>&, const ModelPair<double>&, const TrainingExample&,
                                     const TokenStore&, const TrainOptions&);

std::vector<StepLog> train(ModelPair<float>& pair, const std::vector<TrainingExample>& examples,
                           const TokenStore& data, const TrainOptions& options, const TrainHooks& hooks) {
  if (options.batch < 1 || options.grad_accum < 1) throw ConfigError("batch and grad_accum must be >= 1");
  if (options.lr < 0) throw ConfigError("learning rate must be >= 0");
  if (examples.empty()) throw ConfigError("training set is empty");
  Adam<float> adam(pair.trainable_parameters(options.loss == LossMode::Pointwise));
  const std::size_t group = options.batch * options.grad_accum;
  std::vector<StepLog> log;
  std::size_t local_steps = 0;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix64(options.seed ^ mix64(epoch + 1)));
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += group) {
      const std::size_t end = std::min(order.size(), start + group);
      const float weight = 1.0f / static_cast<float>(end - start);
      double total = 0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = examples[order[i]];
        Graph<float> g;
        auto loss = example_loss(g, pair, ex, data, options);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss at step " + std::to_string(pair.step + 1) + " on example " +
                             ex.qid);
        }
        total += value;
        g.backward(ad::scale(g, loss, weight));
      }
      const double warm = options.warmup_steps
                              ? std::min(1.0, static_cast<double>(local_steps + 1) /
                                                  static_cast<double>(options.warmup_steps))
                              : 1.0;
      adam.step(options.lr * warm);
      ++pair.step;
      ++local_steps;
      StepLog entry{pair.step, total / static_cast<double>(end - start)};
      log.push_back(entry);
      if (hooks.on_step) hooks.on_step(entry);
      if (options.max_steps && local_steps >= options.max_steps) return log;
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch + 1);
  }
  return log;
}

std::string format_loss_csv(const std::vector<StepLog>& log) {
  std::string out = "step,loss\n";
  char buf[64];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g\n", static_cast<unsigned long long>(e.step), e.loss);
    out += buf;
  }
  return out;
}

}  // namespace rrk
