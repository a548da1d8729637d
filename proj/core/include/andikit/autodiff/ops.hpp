#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "andikit/autodiff/tensor.hpp"

namespace andikit::ad {

enum class Mode { Train, Eval };

/// Per-channel affine normalization state.
template <typename T>
struct BatchNorm {
  TensorPtr<T> scale;  // [C]
  TensorPtr<T> shift;  // [C]
  std::vector<T> running_mean;
  std::vector<T> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNorm(std::size_t channels = 0);
  std::size_t channels() const { return running_mean.size(); }
};

/// Cross-correlation. x: [N, C_in, L], w: [C_out, C_in, K] -> [N, C_out, L_out]
/// with L_out = floor((L + 2*padding - K) / stride) + 1.
template <typename T>
TensorPtr<T> conv1d(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    std::size_t stride, std::size_t padding);

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

/// x: [N, C, L]. Train mode normalizes with batch statistics over (N, L) and
/// updates the running statistics; Eval mode uses the running statistics.
template <typename T>
TensorPtr<T> batchnorm1d(Tape<T>& tape, const TensorPtr<T>& x, BatchNorm<T>& bn, Mode mode);

template <typename T>
TensorPtr<T> relu(Tape<T>& tape, const TensorPtr<T>& x);

/// Max pooling over the last axis; padded positions never win.
template <typename T>
TensorPtr<T> max_pool1d(Tape<T>& tape, const TensorPtr<T>& x, std::size_t kernel,
                        std::size_t stride, std::size_t padding);

/// [N, C, L] -> [N, C]
template <typename T>
TensorPtr<T> global_avg_pool1d(Tape<T>& tape, const TensorPtr<T>& x);

template <typename T>
TensorPtr<T> add(Tape<T>& tape, const TensorPtr<T>& a, const TensorPtr<T>& b);

/// x: [N, F], w: [O, F], b: [O] -> [N, O]
template <typename T>
TensorPtr<T> linear(Tape<T>& tape, const TensorPtr<T>& x, const TensorPtr<T>& w,
                    const TensorPtr<T>& b);

/// Row-wise softmax of [N, C].
template <typename T>
TensorPtr<T> softmax(Tape<T>& tape, const TensorPtr<T>& logits);

/// Mean categorical cross-entropy of softmax(logits) against integer labels.
template <typename T>
TensorPtr<T> softmax_cross_entropy(Tape<T>& tape, const TensorPtr<T>& logits,
                                   std::span<const std::size_t> labels);

/// Scalar sum_n x[n, index[n]].
template <typename T>
TensorPtr<T> pick_sum(Tape<T>& tape, const TensorPtr<T>& x, std::span<const std::size_t> index);

/// Scalar sum of all elements.
template <typename T>
TensorPtr<T> sum(Tape<T>& tape, const TensorPtr<T>& x);

/// Row-wise softmax without taping, numerically stabilized.
template <typename T>
void softmax_rows(std::span<const T> logits, std::size_t cols, std::span<T> out);

}  // namespace andikit::ad
