#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace andikit::ad {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array with a same-shape gradient accumulator.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  /// Id of the tape whose operation produced this tensor; 0 for leaves.
  std::uint64_t tape_id = 0;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T{0});
  Tensor(Shape s, std::vector<T> values);

  std::size_t size() const { return value.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  void zero_grad();
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(Shape shape, T fill = T{0}) {
  return std::make_shared<Tensor<T>>(std::move(shape), fill);
}

template <typename T>
TensorPtr<T> make_tensor(Shape shape, std::vector<T> values) {
  return std::make_shared<Tensor<T>>(std::move(shape), std::move(values));
}

/// A trainable leaf tensor.
template <typename T>
struct Parameter {
  std::string name;
  TensorPtr<T> tensor;
};

/// Records executed operations so gradients can be replayed in reverse.
///
/// A tape is single-threaded. When `recording()` is false, operations compute
/// values only and nothing is retained.
template <typename T>
class Tape {
 public:
  explicit Tape(bool recording = true);

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::uint64_t id() const { return id_; }
  std::size_t size() const { return ops_.size(); }

  /// Allocates an operation output. It requires grad when any of `inputs`
  /// does and the tape is recording.
  TensorPtr<T> output(Shape shape, std::initializer_list<const Tensor<T>*> inputs);

  void record(std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and runs the recorded backward rules in exact
  /// reverse order, then clears the tape. `loss` must be a scalar produced by
  /// this tape.
  void backward(const TensorPtr<T>& loss);

  void clear() { ops_.clear(); }

  // Branch tracking: ReLU sign patterns and max-pool winners are folded into a
  // signature so a finite-difference probe can tell when it crossed a kink.
  void set_track_branches(bool on) { track_branches_ = on; }
  bool tracking_branches() const { return track_branches_; }
  void note_branch(std::uint64_t h);
  std::uint64_t branch_signature() const { return branch_hash_; }

 private:
  std::uint64_t id_;
  bool recording_;
  bool track_branches_ = false;
  std::uint64_t branch_hash_ = 0xcbf29ce484222325ULL;
  std::vector<std::function<void()>> ops_;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace andikit::ad
