#pragma once

// Independent reference computations used by tests and the acceptance runner.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "rrk/rng.hpp"

namespace oracle {

inline double gain(int rel, bool exponential) { return exponential ? std::pow(2.0, rel) - 1.0 : rel; }

/// Counting-sort ideal ordering, natural-log discount.
inline double ndcg(const std::vector<std::string>& ranking, const std::map<std::string, int>& judged,
                   std::size_t k, bool exponential) {
  double dcg = 0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) {
    auto it = judged.find(ranking[i]);
    const int rel = it == judged.end() ? 0 : it->second;
    dcg += gain(rel, exponential) * std::log(2.0) / std::log(static_cast<double>(i) + 2.0);
  }
  std::map<int, std::size_t, std::greater<int>> count;
  for (const auto& [doc, rel] : judged) ++count[rel];
  double idcg = 0;
  std::size_t pos = 0;
  for (const auto& [rel, n] : count)
    for (std::size_t j = 0; j < n && pos < k; ++j, ++pos)
      idcg += gain(rel, exponential) * std::log(2.0) / std::log(static_cast<double>(pos) + 2.0);
  return idcg == 0 ? 0 : dcg / idcg;
}

struct NdcgCase {
  std::vector<std::string> ranking;
  std::map<std::string, int> judged;
  std::size_t k;
};

/// Random ranking over a doc pool with random sparse grades 0..3, some judged
/// docs absent from the ranking.
inline NdcgCase random_case(rrk::Rng& rng) {
  NdcgCase c;
  const std::size_t pool = 1 + rng.uniform_index(60);
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < pool; ++i) docs.push_back("d" + std::to_string(i));
  for (const auto& d : docs)
    if (rng.uniform01() < 0.4) c.judged[d] = static_cast<int>(rng.uniform_index(4));
  rng.shuffle(docs);
  const std::size_t shown = 1 + rng.uniform_index(pool);
  c.ranking.assign(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(shown));
  c.k = 1 + rng.uniform_index(20);
  return c;
}

}  // namespace oracle
