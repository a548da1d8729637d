#include "andikit/autodiff/adam.hpp"

#include <algorithm>
#include <cmath>

namespace andikit::ad {

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0 && config_.beta2 >= 0.0 && config_.beta2 < 1.0)) {
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  }
  if (!(config_.eps > 0.0) || !(config_.lr >= 0.0)) {
    throw std::invalid_argument("adam: lr must be >= 0 and eps > 0");
  }
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor->size(), T{0});
    v_.emplace_back(p.tensor->size(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& p : params_) {
    const auto& g = p.tensor->grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) throw NonFiniteGradient(p.name, i);
    }
  }
  ++t_;
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  // bias corrections folded into the step size and epsilon
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const T step = static_cast<T>(config_.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(config_.eps);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& tensor = *params_[k].tensor;
    T* value = tensor.value.data();
    const T* grad = tensor.grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    const std::size_t n = tensor.size();
    for (std::size_t i = 0; i < n; ++i) {
      const T g = grad[i];
      m[i] = b1 * m[i] + (T{1} - b1) * g;
      v[i] = b2 * v[i] + (T{1} - b2) * g * g;
      value[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor->zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace andikit::ad
