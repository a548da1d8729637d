#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "andikit/autodiff/tensor.hpp"

namespace andikit::ad {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor for the relative error, so exact zeros compare absolutely.
  double floor = 1e-6;
  /// 0 checks every element; otherwise at most this many per tensor, chosen
  /// with `seed`.
  std::size_t max_per_tensor = 0;
  std::uint64_t seed = 1;
  /// Oracle cost guard on the number of elements actually probed.
  std::size_t max_checked = 10000;
};

struct GradCheckResult {
  bool passed = true;
  double worst_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  /// Entries skipped because a ReLU sign or pooling winner changed within +-h.
  std::size_t skipped_kinks = 0;
};

/// Builds the scalar loss on the given tape from the current parameter values.
using LossFn = std::function<TensorPtr<double>(Tape<double>&)>;

/// Compares reverse-mode gradients of `loss` with respect to `params` against
/// central differences. Throws std::invalid_argument when more than
/// `max_checked` elements would be probed.
GradCheckResult finite_difference_check(const LossFn& loss, const std::vector<Parameter<double>>& params,
                                        const GradCheckOptions& options = {});

}  // namespace andikit::ad
