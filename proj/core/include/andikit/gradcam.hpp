#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "andikit/autodiff.hpp"
#include "andikit/network.hpp"

namespace andikit::cam {

/// Differentiable map from final-layer activations [N, C, L] to class
/// probabilities [N, classes].
template <typename T>
using ProbabilityHead = std::function<ad::TensorPtr<T>(ad::Tape<T>&, const ad::TensorPtr<T>&)>;

/// softmax(fc(gap(A))) of `model`. The model must outlive the head.
template <typename T>
ProbabilityHead<T> softmax_head(net::ResAnDi<T>& model);

/// a^k = (1/|A^k|) sum_i dp/dA^k_i for each sample, where p is the probability
/// of class_index[n]. One backward pass for the whole batch. Returns [N * C].
template <typename T>
std::vector<double> feature_weights(const ProbabilityHead<T>& head, const ad::Tensor<T>& maps,
                                    std::span<const std::size_t> class_index);

/// G_i = sum_k a^k A^k_i with no rectification. weights [N * C]; returns [N * L].
template <typename T>
std::vector<double> combine_maps(std::span<const double> weights, const ad::Tensor<T>& maps);

template <typename T>
std::vector<double> gradcam_scores(const ProbabilityHead<T>& head, const ad::Tensor<T>& maps,
                                   std::span<const std::size_t> class_index);

enum class ClassChoice { True, Predicted };

std::string_view to_string(ClassChoice c);
ClassChoice parse_class_choice(std::string_view s);

struct GradCamBatch {
  std::size_t nodes = 0;
  std::vector<std::size_t> class_used;  // per trajectory
  std::vector<double> scores;           // [N * nodes]
  std::vector<double> probs;            // [N * classes], eval mode
};

/// Grad-CAM scores of the final convolutional layer for every trajectory of
/// `data`, differentiating the true or the predicted class probability.
template <typename T>
GradCamBatch gradcam_dataset(net::ResAnDi<T>& model, const traj::Dataset& data, ClassChoice choice,
                             unsigned workers = 1, std::size_t batch_size = 64);

/// Half-open input index range [start, end).
struct Range {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Splits [0, input_len) into `nodes` contiguous runs whose sizes differ by at
/// most one, longer runs first.
std::vector<Range> assign_to_subintervals(std::size_t nodes, std::size_t input_len);

/// Per-input-index score: index t gets the score of the run containing t.
std::vector<double> expand_to_input(std::span<const double> node_scores, std::size_t input_len);

struct Window {
  std::size_t start = 0;
  double score = 0.0;
};

/// Windows at starts 0, S, 2S, ... with start + W <= L; window j carries node
/// score G_j. Throws when there are fewer windows than nodes; windows beyond
/// the node count are not produced.
std::vector<Window> subtrajectory_scores(std::span<const double> node_scores, std::size_t input_len,
                                         std::size_t window, std::size_t stride);

struct ReceptiveField {
  std::size_t input_len = 0;
  std::size_t nodes = 0;
  /// response[j * input_len + i]: response of final position j to an impulse
  /// at input step i, normalized by that position's maximum.
  std::vector<double> response;
  std::vector<std::size_t> peak;        // argmax_i per position
  std::vector<std::size_t> span_start;  // first i with response >= threshold
  std::vector<std::size_t> span_end;    // last i with response >= threshold (inclusive)
  double threshold = 0.9;
  std::size_t window = 0;          // recommended W
  double peak_spacing = 0.0;       // mean spacing between adjacent peaks
  std::size_t stride = 0;          // recommended S
};

/// Impulse probe on a zero baseline in eval mode: the input at step i of both
/// channels is raised from 0 to 1 and the summed absolute change of every
/// final-layer channel is recorded per position. The recommended window is the
/// median above-threshold span; the recommended stride tiles `nodes` windows of
/// that length over the input, floor((L - W) / (nodes - 1)).
template <typename T>
ReceptiveField probe_receptive_field(net::ResAnDi<T>& model, double threshold = 0.9,
                                     unsigned workers = 1);

}  // namespace andikit::cam
