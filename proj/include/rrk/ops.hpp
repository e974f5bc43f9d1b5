#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "rrk/tensor.hpp"

// Differentiable operations. All matrices are row-major 2-D tensors; the only
// broadcasting supported is a bias vector over the last axis.
namespace rrk::ad {

template <typename T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

/// a[m x n] + bias[n] on every row.
template <typename T>
Tensor<T> add_bias(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& bias);

template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> silu(Graph<T>& g, const Tensor<T>& a);

/// Softmax over the last axis, max-subtracted.
template <typename T>
Tensor<T> softmax(Graph<T>& g, const Tensor<T>& x);

/// Each row scaled by 1/sqrt(mean(row^2) + eps), then by gain.
template <typename T>
Tensor<T> rms_norm(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& gain, T eps);

/// Row selector for gather_rows: (index into sources, row within it).
struct RowPick {
  std::size_t source;
  std::size_t row;
};

/// Stacks selected rows of several [n_i x d] sources into [picks x d].
/// Embedding lookup and vector injection both go through this.
template <typename T>
Tensor<T> gather_rows(Graph<T>& g, const std::vector<Tensor<T>>& sources,
                      const std::vector<RowPick>& picks);

template <typename T>
Tensor<T> embedding(Graph<T>& g, const Tensor<T>& table, const std::vector<std::size_t>& ids);

template <typename T>
Tensor<T> slice_rows(Graph<T>& g, const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Row i of a matrix as a vector of shape [d].
template <typename T>
Tensor<T> row(Graph<T>& g, const Tensor<T>& x, std::size_t i);

/// Rotary position encoding over interleaved pairs within each head;
/// position of row t is t.
template <typename T>
Tensor<T> rotary(Graph<T>& g, const Tensor<T>& x, std::size_t n_heads, T base);

/// Multi-head causal self-attention on already-projected q, k, v [T x d].
template <typename T>
Tensor<T> causal_attention(Graph<T>& g, const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v, std::size_t n_heads);

/// u.v / (|u||v|). Throws DegenerateVectorError on a zero-norm input.
template <typename T>
Tensor<T> cosine(Graph<T>& g, const Tensor<T>& u, const Tensor<T>& v);

/// Packs scalars into a vector of shape [n].
template <typename T>
Tensor<T> stack(Graph<T>& g, const std::vector<Tensor<T>>& scalars);

template <typename T>
Tensor<T> reshape(Graph<T>& g, const Tensor<T>& x, Shape shape);

template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& x);

template <typename T>
Tensor<T> mean(Graph<T>& g, const Tensor<T>& x);

/// Preference pair (preferred index, non-preferred index).
using IndexPair = std::pair<std::size_t, std::size_t>;

/// sum over pairs of log(1 + exp(-(s_i - s_j) / tau)).
template <typename T>
Tensor<T> ranknet_loss(Graph<T>& g, const Tensor<T>& scores, const std::vector<IndexPair>& pairs,
                       T tau);

/// Mean squared difference against constant targets.
template <typename T>
Tensor<T> mse_loss(Graph<T>& g, const Tensor<T>& predicted, const std::vector<T>& target);

/// Max over parameters of |analytic - numeric| / max(1, |numeric|), with
/// two-sided differences of step h. build must construct a fresh graph and
/// return the scalar output for the current parameter values.
double finite_diff_check(const std::function<Tensor<double>(Graph<double>&)>& build,
                         std::vector<Tensor<double>> params, double h = 1e-5);

}  // namespace rrk::ad
