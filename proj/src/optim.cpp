#include "rrk/optim.hpp"

#include <cmath>

namespace rrk {

template <typename T>
Adam<T>::Adam(std::vector<ad::Tensor<T>> params, AdamOptions options)
    : params_(std::move(params)), opt_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto value = p.mutable_data();
    const bool has = p.has_grad();
    auto grad = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = has ? static_cast<double>(grad[j]) : 0.0;
      m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g;
      v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g * g;
      const double update = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt_.eps);
      value[j] = static_cast<T>(value[j] - update);
    }
  }
  zero_grad();
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace rrk
