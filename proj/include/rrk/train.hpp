#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrk/distill.hpp"
#include "rrk/model_pair.hpp"

namespace rrk {

enum class LossMode { Listwise, Pointwise };
LossMode parse_loss_mode(const std::string& s);
const char* loss_mode_name(LossMode m);

struct TrainOptions {
  LossMode loss = LossMode::Listwise;
  double lr = 1e-3;
  std::size_t epochs = 2;
  std::size_t grad_accum = 4;
  std::size_t batch = 1;
  std::size_t warmup_steps = 0;
  /// Stop after this many optimizer steps; 0 for no limit.
  std::size_t max_steps = 0;
  double tau = kDefaultTau;
  std::size_t max_doc_len = 128;
  std::uint64_t seed = 0;
};

/// Token ids by document and query id.
struct TokenStore {
  std::unordered_map<std::string, std::vector<TokenId>> docs;
  std::unordered_map<std::string, std::vector<TokenId>> queries;

  const std::vector<TokenId>& doc(const std::string& id) const;
  const std::vector<TokenId>& query(const std::string& id) const;
};

TokenStore tokenize_all(const Tokenizer& tok, const std::vector<Document>& docs,
                        const std::vector<Query>& queries);

struct StepLog {
  std::uint64_t step = 0;
  double loss = 0;
};

struct TrainHooks {
  std::function<void(const StepLog&)> on_step;
  std::function<void(std::size_t epoch)> on_epoch_end;  // 1-based
};

/// Loss of one example, with documents compressed inside g so the ranking
/// loss reaches the compressor.
template <typename T>
Tensor<T> example_loss(Graph<T>& g, const ModelPair<T>& pair, const TrainingExample& ex,
                       const TokenStore& data, const TrainOptions& options);

/// Adam over pair.trainable_parameters(); one step consumes batch * grad_accum
/// examples and logs their mean loss. Throws NumericError on a non-finite
/// loss, naming the step and the example's qid.
std::vector<StepLog> train(ModelPair<float>& pair, const std::vector<TrainingExample>& examples,
                           const TokenStore& data, const TrainOptions& options,
                           const TrainHooks& hooks = {});

std::string format_loss_csv(const std::vector<StepLog>& log);

}  // namespace rrk
