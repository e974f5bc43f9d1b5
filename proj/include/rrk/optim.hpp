#pragma once

#include <cstdint>
#include <vector>

#include "rrk/tensor.hpp"

namespace rrk {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Parameters without a gradient are treated as
/// having a zero gradient.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ad::Tensor<T>> params, AdamOptions options = {});

  /// Applies one update with learning rate lr, then clears gradients.
  void step(double lr);
  void zero_grad();
  std::uint64_t steps() const { return t_; }
  const std::vector<ad::Tensor<T>>& params() const { return params_; }

 private:
  std::vector<ad::Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamOptions opt_;
  std::uint64_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace rrk
