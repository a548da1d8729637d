#include "andikit/gradcam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "andikit/parallel.hpp"

namespace andikit::cam {

using ad::Tape;
using ad::TensorPtr;

template <typename T>
ProbabilityHead<T> softmax_head(net::ResAnDi<T>& model) {
  return [&model](Tape<T>& tape, const TensorPtr<T>& maps) { return ad::softmax(tape, model.head(tape, maps)); };
}

template <typename T>
std::vector<double> feature_weights(const ProbabilityHead<T>& head, const ad::Tensor<T>& maps,
                                    std::span<const std::size_t> class_index) {
  if (maps.shape.size() != 3) throw std::invalid_argument("feature_weights: maps must be [N, C, L]");
  const std::size_t n = maps.dim(0), c = maps.dim(1), len = maps.dim(2);
  if (class_index.size() != n) throw std::invalid_argument("feature_weights: one class index per sample required");
  auto leaf = ad::make_tensor<T>(maps.shape, maps.value);
  leaf->requires_grad = true;
  Tape<T> tape(true);
  const auto probs = head(tape, leaf);
  if (probs->shape.size() != 2 || probs->dim(0) != n) {
    throw std::invalid_argument("feature_weights: head must return [N, classes]");
  }
  for (auto k : class_index) {
    if (k >= probs->dim(1)) throw std::out_of_range("class index " + std::to_string(k) + " out of range");
  }
  // Samples are independent in eval-mode heads, so one backward of the sum
  // yields every per-sample gradient.
  tape.backward(ad::pick_sum(tape, probs, class_index));
  std::vector<double> weights(n * c, 0.0);
  for (std::size_t r = 0; r < n * c; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < len; ++i) s += static_cast<double>(leaf->grad[r * len + i]);
    weights[r] = s / static_cast<double>(len);
  }
  return weights;
}

template <typename T>
std::vector<double> combine_maps(std::span<const double> weights, const ad::Tensor<T>& maps) {
  const std::size_t n = maps.dim(0), c = maps.dim(1), len = maps.dim(2);
  if (weights.size() != n * c) throw std::invalid_argument("combine_maps: weight count mismatch");
  std::vector<double> g(n * len, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < c; ++k) {
      const double a = weights[b * c + k];
      const T* row = maps.value.data() + (b * c + k) * len;
      for (std::size_t i = 0; i < len; ++i) g[b * len + i] += a * static_cast<double>(row[i]);
    }
  }
  return g;
}

template <typename T>
std::vector<double> gradcam_scores(const ProbabilityHead<T>& head, const ad::Tensor<T>& maps,
                                   std::span<const std::size_t> class_index) {
  return combine_maps<T>(feature_weights(head, maps, class_index), maps);
}

std::string_view to_string(ClassChoice c) { return c == ClassChoice::True ? "true" : "predicted"; }

ClassChoice parse_class_choice(std::string_view s) {
  if (s == "true") return ClassChoice::True;
  if (s == "predicted") return ClassChoice::Predicted;
  throw std::invalid_argument("class choice must be 'true' or 'predicted', got '" + std::string(s) + "'");
}

template <typename T>
GradCamBatch gradcam_dataset(net::ResAnDi<T>& model, const traj::Dataset& data, ClassChoice choice,
                             unsigned workers, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("gradcam: batch_size must be positive");
  const std::size_t classes = model.config().num_classes;
  GradCamBatch out;
  out.nodes = model.config().final_length();
  out.class_used.resize(data.size());
  out.scores.resize(data.size() * out.nodes);
  out.probs.resize(data.size() * classes);
  const auto head = softmax_head(model);
  const std::size_t chunks = (data.size() + batch_size - 1) / batch_size;
  parallel_for(chunks, workers, [&](std::size_t chunk) {
    const std::size_t begin = chunk * batch_size;
    const std::size_t end = std::min(data.size(), begin + batch_size);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    Tape<T> frozen(false);
    const auto maps = model.trunk(frozen, net::make_batch<T>(data, idx, model.config().input_len), ad::Mode::Eval);
    const auto probs = head(frozen, maps);
    std::vector<std::size_t> cls(idx.size());
    for (std::size_t n = 0; n < idx.size(); ++n) {
      for (std::size_t k = 0; k < classes; ++k) {
        out.probs[(begin + n) * classes + k] = static_cast<double>(probs->value[n * classes + k]);
      }
      cls[n] = choice == ClassChoice::True
                   ? traj::class_index(data[begin + n].label)
                   : net::argmax_row(std::span<const double>(out.probs).subspan(begin * classes), n, classes);
      out.class_used[begin + n] = cls[n];
    }
    const auto g = gradcam_scores(head, *maps, cls);
    std::copy(g.begin(), g.end(), out.scores.begin() + static_cast<std::ptrdiff_t>(begin * out.nodes));
  });
  return out;
}

std::vector<Range> assign_to_subintervals(std::size_t nodes, std::size_t input_len) {
  if (nodes == 0) throw std::invalid_argument("assign_to_subintervals: need at least one node");
  if (input_len < nodes) {
    throw std::invalid_argument("assign_to_subintervals: input length " + std::to_string(input_len) +
                                " is shorter than the node count " + std::to_string(nodes));
  }
  const std::size_t base = input_len / nodes;
  const std::size_t extra = input_len % nodes;
  std::vector<Range> runs(nodes);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    runs[i] = {pos, pos + size};
    pos += size;
  }
  return runs;
}

std::vector<double> expand_to_input(std::span<const double> node_scores, std::size_t input_len) {
  const auto runs = assign_to_subintervals(node_scores.size(), input_len);
  std::vector<double> out(input_len);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(runs[i].start),
              out.begin() + static_cast<std::ptrdiff_t>(runs[i].end), node_scores[i]);
  }
  return out;
}

std::vector<Window> subtrajectory_scores(std::span<const double> node_scores, std::size_t input_len,
                                         std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw std::invalid_argument("subtrajectory windows need W > 0 and S > 0");
  if (window > input_len) throw std::invalid_argument("window longer than the input");
  const std::size_t count = (input_len - window) / stride + 1;
  if (count < node_scores.size()) {
    throw std::invalid_argument("W=" + std::to_string(window) + ", S=" + std::to_string(stride) + " gives " +
                                std::to_string(count) + " windows for " + std::to_string(node_scores.size()) +
                                " nodes");
  }
  std::vector<Window> out(node_scores.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = {j * stride, node_scores[j]};
  return out;
}

template <typename T>
ReceptiveField probe_receptive_field(net::ResAnDi<T>& model, double threshold, unsigned workers) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("probe: threshold must be in (0, 1]");
  const auto& cfg = model.config();
  const std::size_t len = cfg.input_len;
  const std::size_t nodes = cfg.final_length();
  const std::size_t channels = cfg.final_channels();

  ReceptiveField rf;
  rf.input_len = len;
  rf.nodes = nodes;
  rf.threshold = threshold;
  rf.response.assign(nodes * len, 0.0);

  std::vector<T> baseline;
  {
    Tape<T> tape(false);
    const auto maps = model.trunk(tape, ad::make_tensor<T>({1, 2, len}), ad::Mode::Eval);
    baseline = maps->value;
  }
  const std::size_t batch = 32;
  const std::size_t chunks = (len + batch - 1) / batch;
  parallel_for(chunks, workers, [&](std::size_t chunk) {
    const std::size_t begin = chunk * batch;
    const std::size_t end = std::min(len, begin + batch);
    auto x = ad::make_tensor<T>({end - begin, 2, len});
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t n = i - begin;
      x->value[(n * 2) * len + i] = T{1};
      x->value[(n * 2 + 1) * len + i] = T{1};
    }
    Tape<T> tape(false);
    const auto maps = model.trunk(tape, x, ad::Mode::Eval);
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t n = i - begin;
      for (std::size_t j = 0; j < nodes; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < channels; ++k) {
          const std::size_t at = k * nodes + j;
          s += std::abs(static_cast<double>(maps->value[n * channels * nodes + at]) -
                        static_cast<double>(baseline[at]));
        }
        rf.response[j * len + i] = s;
      }
    }
  });

  std::vector<std::size_t> spans;
  for (std::size_t j = 0; j < nodes; ++j) {
    double* row = rf.response.data() + j * len;
    const auto top = std::max_element(row, row + len);
    const double mx = *top;
    rf.peak.push_back(static_cast<std::size_t>(top - row));
    if (mx > 0.0) {
      for (std::size_t i = 0; i < len; ++i) row[i] /= mx;
    }
    std::size_t first = len, last = 0;
    for (std::size_t i = 0; i < len; ++i) {
      if (mx > 0.0 && row[i] >= threshold) {
        first = std::min(first, i);
        last = i;
      }
    }
    if (first == len) first = last = rf.peak.back();
    rf.span_start.push_back(first);
    rf.span_end.push_back(last);
    spans.push_back(last - first + 1);
  }
  std::sort(spans.begin(), spans.end());
  rf.window = spans.size() % 2 == 1 ? spans[spans.size() / 2]
                                    : (spans[spans.size() / 2 - 1] + spans[spans.size() / 2] + 1) / 2;
  rf.window = std::clamp<std::size_t>(rf.window, 1, len);
  if (nodes > 1) {
    rf.peak_spacing = (static_cast<double>(rf.peak.back()) - static_cast<double>(rf.peak.front())) /
                      static_cast<double>(nodes - 1);
    rf.stride = std::max<std::size_t>(1, (len - rf.window) / (nodes - 1));
  } else {
    rf.stride = 1;
  }
  return rf;
}

#define ANDIKIT_INSTANTIATE_CAM(T)                                                                          \
  template ProbabilityHead<T> softmax_head(net::ResAnDi<T>&);                                               \
  template std::vector<double> feature_weights(const ProbabilityHead<T>&, const ad::Tensor<T>&,             \
                                               std::span<const std::size_t>);                               \
  template std::vector<double> combine_maps<T>(std::span<const double>, const ad::Tensor<T>&);              \
  template std::vector<double> gradcam_scores(const ProbabilityHead<T>&, const ad::Tensor<T>&,              \
                                              std::span<const std::size_t>);                                \
  template GradCamBatch gradcam_dataset(net::ResAnDi<T>&, const traj::Dataset&, ClassChoice, unsigned,      \
                                        std::size_t);                                                       \
  template ReceptiveField probe_receptive_field(net::ResAnDi<T>&, double, unsigned);

ANDIKIT_INSTANTIATE_CAM(float)
ANDIKIT_INSTANTIATE_CAM(double)

#undef ANDIKIT_INSTANTIATE_CAM

}  // namespace andikit::cam
