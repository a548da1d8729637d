#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "andikit/autodiff/tensor.hpp"

namespace andikit::ad {

/// Thrown by Adam::step when a gradient holds NaN or infinity. No parameter is
/// modified by the rejected step.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(const std::string& param, std::size_t index)
      : std::runtime_error("non-finite gradient in '" + param + "' at element " +
                           std::to_string(index)),
        param_(param),
        index_(index) {}
  const std::string& param() const { return param_; }
  std::size_t index() const { return index_; }

 private:
  std::string param_;
  std::size_t index_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>> params, AdamConfig config = {});

  /// One bias-corrected update from the gradients currently held by the
  /// parameters. Gradients are left untouched; call zero_grad() afterwards.
  void step();
  void zero_grad();

  void set_lr(double lr) { config_.lr = lr; }
  double lr() const { return config_.lr; }
  std::size_t steps() const { return t_; }
  const std::vector<Parameter<T>>& params() const { return params_; }

 private:
  std::vector<Parameter<T>> params_;
  AdamConfig config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::size_t t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace andikit::ad
