#include "rrk/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace rrk::ad {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got shape " +
                         to_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

// Shapes of a tensor viewed as rows x last-axis.
template <typename T>
std::pair<std::size_t, std::size_t> as_rows(const Tensor<T>& t) {
  const std::size_t n = t.cols();
  return {n == 0 ? 0 : t.size() / n, n};
}

template <typename T>
T sigmoid(T z) {
  if (z >= 0) {
    const T e = std::exp(-z);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
T softplus(T z) {
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

template <typename T>
Tensor<T> matmul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  std::vector<T> out(m * n);
  MapMat<T>(out.data(), m, n).noalias() =
      CMapMat<T>(a.data().data(), m, k) * CMapMat<T>(b.data().data(), k, n);
  return g.make({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    CMapMat<T> dc(self.grad.data(), m, n);
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      MapMat<T>(pa.grad_data(), m, k).noalias() +=
          dc * CMapMat<T>(pb.value.data(), k, n).transpose();
    }
    if (pb.requires_grad) {
      MapMat<T>(pb.grad_data(), k, n).noalias() +=
          CMapMat<T>(pa.value.data(), m, k).transpose() * dc;
    }
  });
}

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return g.make(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (auto& p : self.parents) {
      if (!p->requires_grad) continue;
      T* dp = p->grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) dp[i] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> add_bias(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& bias) {
  const auto [m, n] = as_rows(a);
  if (bias.rank() != 1 || bias.size() != n) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not match " +
                         to_string(a.shape()));
  }
  std::vector<T> out(a.size());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = a.data()[r * n + c] + bias.data()[c];
  return g.make(a.shape(), std::move(out), {a, bias}, [m, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      T* da = pa.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      T* db = pb.grad_data();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) db[c] += self.grad[r * n + c];
    }
  });
}

template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return g.make(a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      T* da = pa.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      T* db = pb.grad_data();
      for (std::size_t i = 0; i < self.grad.size(); ++i) db[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return g.make(a.shape(), std::move(out), {a}, [factor](Node<T>& self) {
    T* da = self.parents[0]->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) da[i] += self.grad[i] * factor;
  });
}

template <typename T>
Tensor<T> silu(Graph<T>& g, const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = a.data()[i];
    out[i] = x * sigmoid(x);
  }
  return g.make(a.shape(), std::move(out), {a}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    T* da = pa.grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T x = pa.value[i];
      const T s = sigmoid(x);
      da[i] += self.grad[i] * s * (T(1) + x * (T(1) - s));
    }
  });
}

template <typename T>
Tensor<T> softmax(Graph<T>& g, const Tensor<T>& x) {
  const auto [m, n] = as_rows(x);
  std::vector<T> out(x.size());
  for (std::size_t r = 0; r < m; ++r) {
    const T* in = x.data().data() + r * n;
    T* o = out.data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T total = 0;
    for (std::size_t c = 0; c < n; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (std::size_t c = 0; c < n; ++c) o[c] /= total;
  }
  return g.make(x.shape(), std::move(out), {x}, [m, n](Node<T>& self) {
    T* dx = self.parents[0]->grad_data();
    for (std::size_t r = 0; r < m; ++r) {
      const T* y = self.value.data() + r * n;
      const T* dy = self.grad.data() + r * n;
      T dot = 0;
      for (std::size_t c = 0; c < n; ++c) dot += dy[c] * y[c];
      for (std::size_t c = 0; c < n; ++c) dx[r * n + c] += y[c] * (dy[c] - dot);
    }
  });
}

template <typename T>
Tensor<T> rms_norm(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& gain, T eps) {
  const auto [m, d] = as_rows(x);
  if (gain.rank() != 1 || gain.size() != d) {
    throw DimensionError("rms_norm: gain " + to_string(gain.shape()) + " does not match " +
                         to_string(x.shape()));
  }
  std::vector<T> out(x.size());
  std::vector<T> inv_rms(m);
  for (std::size_t r = 0; r < m; ++r) {
    const T* in = x.data().data() + r * d;
    T ms = 0;
    for (std::size_t c = 0; c < d; ++c) ms += in[c] * in[c];
    ms /= static_cast<T>(d);
    inv_rms[r] = T(1) / std::sqrt(ms + eps);
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] = in[c] * inv_rms[r] * gain.data()[c];
  }
  return g.make(x.shape(), std::move(out), {x, gain},
                [m, d, inv_rms = std::move(inv_rms)](Node<T>& self) {
                  auto& px = *self.parents[0];
                  auto& pg = *self.parents[1];
                  T* dx = px.requires_grad ? px.grad_data() : nullptr;
                  T* dg = pg.requires_grad ? pg.grad_data() : nullptr;
                  for (std::size_t r = 0; r < m; ++r) {
                    const T* in = px.value.data() + r * d;
                    const T* dy = self.grad.data() + r * d;
                    const T ir = inv_rms[r];
                    T dot = 0;
                    for (std::size_t c = 0; c < d; ++c) {
                      const T xhat = in[c] * ir;
                      if (dg) dg[c] += dy[c] * xhat;
                      dot += dy[c] * pg.value[c] * xhat;
                    }
                    if (!dx) continue;
                    dot /= static_cast<T>(d);
                    for (std::size_t c = 0; c < d; ++c) {
                      const T xhat = in[c] * ir;
                      dx[r * d + c] += ir * (dy[c] * pg.value[c] - xhat * dot);
                    }
                  }
                });
}

template <typename T>
Tensor<T> gather_rows(Graph<T>& g, const std::vector<Tensor<T>>& sources,
                      const std::vector<RowPick>& picks) {
  if (sources.empty()) throw ContractError("gather_rows: no sources");
  const std::size_t d = sources.front().cols();
  for (const auto& s : sources) {
    if (s.cols() != d) {
      throw DimensionError("gather_rows: width mismatch " + to_string(s.shape()) + " vs " +
                           to_string(sources.front().shape()));
    }
  }
  std::vector<T> out(picks.size() * d);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const auto& p = picks[i];
    if (p.source >= sources.size() || p.row >= sources[p.source].rows()) {
      throw DimensionError("gather_rows: pick (" + std::to_string(p.source) + ", " +
                           std::to_string(p.row) + ") out of range");
    }
    std::copy_n(sources[p.source].data().data() + p.row * d, d, out.data() + i * d);
  }
  return g.make({picks.size(), d}, std::move(out), sources, [picks, d](Node<T>& self) {
    for (std::size_t i = 0; i < picks.size(); ++i) {
      auto& src = *self.parents[picks[i].source];
      if (!src.requires_grad) continue;
      T* ds = src.grad_data() + picks[i].row * d;
      const T* dy = self.grad.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) ds[c] += dy[c];
    }
  });
}

template <typename T>
Tensor<T> embedding(Graph<T>& g, const Tensor<T>& table, const std::vector<std::size_t>& ids) {
  std::vector<RowPick> picks;
  picks.reserve(ids.size());
  for (auto id : ids) picks.push_back({0, id});
  return gather_rows(g, {table}, picks);
}

template <typename T>
Tensor<T> slice_rows(Graph<T>& g, const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t d = x.cols();
  if (begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") exceeds " + to_string(x.shape()));
  }
  std::vector<T> out(x.data().begin() + begin * d, x.data().begin() + (begin + count) * d);
  return g.make({count, d}, std::move(out), {x}, [begin, d](Node<T>& self) {
    T* dx = self.parents[0]->grad_data() + begin * d;
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> row(Graph<T>& g, const Tensor<T>& x, std::size_t i) {
  require_matrix(x, "row");
  const std::size_t d = x.cols();
  if (i >= x.rows()) {
    throw DimensionError("row " + std::to_string(i) + " out of range for " + to_string(x.shape()));
  }
  std::vector<T> out(x.data().begin() + i * d, x.data().begin() + (i + 1) * d);
  return g.make({d}, std::move(out), {x}, [i, d](Node<T>& self) {
    T* dx = self.parents[0]->grad_data() + i * d;
    for (std::size_t c = 0; c < d; ++c) dx[c] += self.grad[c];
  });
}

template <typename T>
Tensor<T> rotary(Graph<T>& g, const Tensor<T>& x, std::size_t n_heads, T base) {
  require_matrix(x, "rotary");
  const std::size_t t_len = x.rows(), d = x.cols();
  if (n_heads == 0 || d % n_heads != 0 || (d / n_heads) % 2 != 0) {
    throw DimensionError("rotary: width " + std::to_string(d) + " not splittable into " +
                         std::to_string(n_heads) + " even heads");
  }
  const std::size_t dh = d / n_heads, half = dh / 2;
  std::vector<T> cos_t(t_len * half), sin_t(t_len * half);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::pow(static_cast<double>(base),
                                   -2.0 * static_cast<double>(i) / static_cast<double>(dh));
      const double angle = static_cast<double>(t) * freq;
      cos_t[t * half + i] = static_cast<T>(std::cos(angle));
      sin_t[t * half + i] = static_cast<T>(std::sin(angle));
    }
  }
  std::vector<T> out(x.size());
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t i = 0; i < half; ++i) {
        const std::size_t at = t * d + h * dh + 2 * i;
        const T c = cos_t[t * half + i], s = sin_t[t * half + i];
        const T a = x.data()[at], b = x.data()[at + 1];
        out[at] = a * c - b * s;
        out[at + 1] = a * s + b * c;
      }
    }
  }
  return g.make(x.shape(), std::move(out), {x},
                [t_len, d, n_heads, dh, half, cos_t = std::move(cos_t),
                 sin_t = std::move(sin_t)](Node<T>& self) {
                  T* dx = self.parents[0]->grad_data();
                  for (std::size_t t = 0; t < t_len; ++t) {
                    for (std::size_t h = 0; h < n_heads; ++h) {
                      for (std::size_t i = 0; i < half; ++i) {
                        const std::size_t at = t * d + h * dh + 2 * i;
                        const T c = cos_t[t * half + i], s = sin_t[t * half + i];
                        const T ga = self.grad[at], gb = self.grad[at + 1];
                        dx[at] += ga * c + gb * s;
                        dx[at + 1] += -ga * s + gb * c;
                      }
                    }
                  }
                });
}

template <typename T>
Tensor<T> causal_attention(Graph<T>& g, const Tensor<T>& q, const Tensor<T>& k,
                           const Tensor<T>& v, std::size_t n_heads) {
  require_matrix(q, "causal_attention");
  require_same_shape(q, k, "causal_attention");
  require_same_shape(q, v, "causal_attention");
  const std::size_t t_len = q.rows(), d = q.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("causal_attention: width " + std::to_string(d) +
                         " not divisible by heads " + std::to_string(n_heads));
  }
  const std::size_t dh = d / n_heads;
  const T scale_f = T(1) / std::sqrt(static_cast<T>(dh));
  const auto ld = static_cast<Eigen::Index>(d);
  const auto tl = static_cast<Eigen::Index>(t_len);
  const auto hd = static_cast<Eigen::Index>(dh);

  std::vector<T> out(t_len * d, T(0));
  std::vector<T> probs(n_heads * t_len * t_len, T(0));
  RowMat<T> scores(tl, tl);
  for (std::size_t h = 0; h < n_heads; ++h) {
    CStridedMap<T> qh(q.data().data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
    CStridedMap<T> kh(k.data().data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
    CStridedMap<T> vh(v.data().data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
    scores.noalias() = qh * kh.transpose();
    MapMat<T> p(probs.data() + h * t_len * t_len, tl, tl);
    for (Eigen::Index r = 0; r < tl; ++r) {
      T mx = -std::numeric_limits<T>::infinity();
      for (Eigen::Index c = 0; c <= r; ++c) mx = std::max(mx, scores(r, c) * scale_f);
      T total = 0;
      for (Eigen::Index c = 0; c <= r; ++c) {
        p(r, c) = std::exp(scores(r, c) * scale_f - mx);
        total += p(r, c);
      }
      for (Eigen::Index c = 0; c <= r; ++c) p(r, c) /= total;
    }
    StridedMap<T> oh(out.data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
    oh.noalias() = p * vh;
  }

  if (!g.enabled()) probs.clear();
  return g.make(q.shape(), std::move(out), {q, k, v},
                [t_len, d, n_heads, dh, scale_f, probs = std::move(probs)](Node<T>& self) {
                  auto& pq = *self.parents[0];
                  auto& pk = *self.parents[1];
                  auto& pv = *self.parents[2];
                  const auto ld = static_cast<Eigen::Index>(d);
                  const auto tl = static_cast<Eigen::Index>(t_len);
                  const auto hd = static_cast<Eigen::Index>(dh);
                  RowMat<T> dp(tl, tl), ds(tl, tl);
                  for (std::size_t h = 0; h < n_heads; ++h) {
                    CMapMat<T> p(probs.data() + h * t_len * t_len, tl, tl);
                    CStridedMap<T> dout(self.grad.data() + h * dh, tl, hd,
                                        Eigen::OuterStride<>(ld));
                    CStridedMap<T> qh(pq.value.data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
                    CStridedMap<T> kh(pk.value.data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
                    CStridedMap<T> vh(pv.value.data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
                    if (pv.requires_grad) {
                      StridedMap<T> dv(pv.grad_data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
                      dv.noalias() += p.transpose() * dout;
                    }
                    if (!pq.requires_grad && !pk.requires_grad) continue;
                    dp.noalias() = dout * vh.transpose();
                    for (Eigen::Index r = 0; r < tl; ++r) {
                      T dot = 0;
                      for (Eigen::Index c = 0; c <= r; ++c) dot += dp(r, c) * p(r, c);
                      for (Eigen::Index c = 0; c < tl; ++c)
                        ds(r, c) = c <= r ? p(r, c) * (dp(r, c) - dot) * scale_f : T(0);
                    }
                    if (pq.requires_grad) {
                      StridedMap<T> dq(pq.grad_data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
                      dq.noalias() += ds * kh;
                    }
                    if (pk.requires_grad) {
                      StridedMap<T> dk(pk.grad_data() + h * dh, tl, hd, Eigen::OuterStride<>(ld));
                      dk.noalias() += ds.transpose() * qh;
                    }
                  }
                });
}

template <typename T>
Tensor<T> cosine(Graph<T>& g, const Tensor<T>& u, const Tensor<T>& v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine: length mismatch " + to_string(u.shape()) + " vs " +
                         to_string(v.shape()));
  }
  T dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u.data()[i] * v.data()[i];
    uu += u.data()[i] * u.data()[i];
    vv += v.data()[i] * v.data()[i];
  }
  // non-finite inputs propagate so the caller can report where they came from
  if (uu == T(0) || vv == T(0)) {
    throw DegenerateVectorError("cosine of a zero-norm vector is undefined");
  }
  const T nu = std::sqrt(uu), nv = std::sqrt(vv);
  const T s = dot / (nu * nv);
  return g.make({}, {s}, {u, v}, [nu, nv, s](Node<T>& self) {
    const T gs = self.grad[0];
    auto& pu = *self.parents[0];
    auto& pv = *self.parents[1];
    const std::size_t n = pu.value.size();
    if (pu.requires_grad) {
      T* du = pu.grad_data();
      for (std::size_t i = 0; i < n; ++i)
        du[i] += gs * (pv.value[i] / (nu * nv) - s * pu.value[i] / (nu * nu));
    }
    if (pv.requires_grad) {
      T* dv = pv.grad_data();
      for (std::size_t i = 0; i < n; ++i)
        dv[i] += gs * (pu.value[i] / (nu * nv) - s * pv.value[i] / (nv * nv));
    }
  });
}

template <typename T>
Tensor<T> stack(Graph<T>& g, const std::vector<Tensor<T>>& scalars) {
  std::vector<T> out;
  out.reserve(scalars.size());
  for (const auto& s : scalars) out.push_back(s.item());
  return g.make({scalars.size()}, std::move(out), scalars, [](Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      if (self.parents[i]->requires_grad) self.parents[i]->grad_data()[0] += self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> reshape(Graph<T>& g, const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw DimensionError("reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return g.make(std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    T* dx = self.parents[0]->grad_data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) dx[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& x) {
  T total = 0;
  for (T v : x.data()) total += v;
  return g.make({}, {total}, {x}, [](Node<T>& self) {
    auto& px = *self.parents[0];
    T* dx = px.grad_data();
    for (std::size_t i = 0; i < px.value.size(); ++i) dx[i] += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(Graph<T>& g, const Tensor<T>& x) {
  if (x.size() == 0) throw ContractError("mean of an empty tensor");
  return scale(g, sum(g, x), T(1) / static_cast<T>(x.size()));
}

template <typename T>
Tensor<T> ranknet_loss(Graph<T>& g, const Tensor<T>& scores, const std::vector<IndexPair>& pairs,
                       T tau) {
  if (!(tau > T(0))) throw ContractError("ranknet_loss: temperature must be positive");
  for (const auto& [i, j] : pairs) {
    if (i >= scores.size() || j >= scores.size()) {
      throw DimensionError("ranknet_loss: pair index out of range for " +
                           to_string(scores.shape()));
    }
  }
  T loss = 0;
  for (const auto& [i, j] : pairs) loss += softplus(-(scores.data()[i] - scores.data()[j]) / tau);
  return g.make({}, {loss}, {scores}, [pairs, tau](Node<T>& self) {
    auto& ps = *self.parents[0];
    T* ds = ps.grad_data();
    const T gl = self.grad[0];
    for (const auto& [i, j] : pairs) {
      const T z = -(ps.value[i] - ps.value[j]) / tau;
      const T w = gl * sigmoid(z) / tau;
      ds[i] -= w;
      ds[j] += w;
    }
  });
}

template <typename T>
Tensor<T> mse_loss(Graph<T>& g, const Tensor<T>& predicted, const std::vector<T>& target) {
  if (predicted.size() != target.size() || target.empty()) {
    throw ContractError("mse_loss: lengths " + std::to_string(predicted.size()) + " and " +
                        std::to_string(target.size()) + " must match and be nonzero");
  }
  const auto n = static_cast<T>(target.size());
  T total = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const T e = predicted.data()[i] - target[i];
    total += e * e;
  }
  return g.make({}, {total / n}, {predicted}, [target, n](Node<T>& self) {
    auto& pp = *self.parents[0];
    T* dp = pp.grad_data();
    for (std::size_t i = 0; i < target.size(); ++i)
      dp[i] += self.grad[0] * T(2) * (pp.value[i] - target[i]) / n;
  });
}

double finite_diff_check(const std::function<Tensor<double>(Graph<double>&)>& build,
                         std::vector<Tensor<double>> params, double h) {
  for (auto& p : params) p.zero_grad();
  {
    Graph<double> g;
    auto out = build(g);
    g.backward(out);
  }
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      Graph<double> gp(false);
      const double up = build(gp).item();
      values[i] = saved - h;
      Graph<double> gm(false);
      const double down = build(gm).item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
    }
  }
  return worst;
}

#define RRK_INSTANTIATE_OPS(T)                                                                    \
  template Tensor<T> matmul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> add_bias(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> mul(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> scale(Graph<T>&, const Tensor<T>&, T);                                        \
  template Tensor<T> silu(Graph<T>&, const Tensor<T>&);                                            \
  template Tensor<T> softmax(Graph<T>&, const Tensor<T>&);                                         \
  template Tensor<T> rms_norm(Graph<T>&, const Tensor<T>&, const Tensor<T>&, T);                   \
  template Tensor<T> gather_rows(Graph<T>&, const std::vector<Tensor<T>>&,                         \
                                 const std::vector<RowPick>&);                                     \
  template Tensor<T> embedding(Graph<T>&, const Tensor<T>&, const std::vector<std::size_t>&);      \
  template Tensor<T> slice_rows(Graph<T>&, const Tensor<T>&, std::size_t, std::size_t);            \
  template Tensor<T> row(Graph<T>&, const Tensor<T>&, std::size_t);                                \
  template Tensor<T> rotary(Graph<T>&, const Tensor<T>&, std::size_t, T);                          \
  template Tensor<T> causal_attention(Graph<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                      const Tensor<T>&, std::size_t);                              \
  template Tensor<T> cosine(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> stack(Graph<T>&, const std::vector<Tensor<T>>&);                              \
  template Tensor<T> reshape(Graph<T>&, const Tensor<T>&, Shape);                                  \
  template Tensor<T> sum(Graph<T>&, const Tensor<T>&);                                             \
  template Tensor<T> mean(Graph<T>&, const Tensor<T>&);                                            \
  template Tensor<T> ranknet_loss(Graph<T>&, const Tensor<T>&, const std::vector<IndexPair>&, T);  \
  template Tensor<T> mse_loss(Graph<T>&, const Tensor<T>&, const std::vector<T>&);

RRK_INSTANTIATE_OPS(float)
RRK_INSTANTIATE_OPS(double)

}  // namespace rrk::ad
