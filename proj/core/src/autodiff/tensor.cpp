#include "andikit/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <ranges>
#include <stdexcept>

namespace andikit::ad {
namespace {

std::uint64_t next_tape_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape s, T fill)
    : shape(std::move(s)), value(element_count(shape), fill), grad(value.size(), T{0}) {}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values)
    : shape(std::move(s)), value(std::move(values)), grad(value.size(), T{0}) {
  if (value.size() != element_count(shape)) {
    throw std::invalid_argument("tensor data size does not match shape " + shape_string(shape));
  }
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::ranges::fill(grad, T{0});
}

template <typename T>
Tape<T>::Tape(bool recording) : id_(next_tape_id()), recording_(recording) {}

template <typename T>
TensorPtr<T> Tape<T>::output(Shape shape, std::initializer_list<const Tensor<T>*> inputs) {
  auto out = make_tensor<T>(std::move(shape));
  out->tape_id = id_;
  if (recording_) {
    out->requires_grad = std::ranges::any_of(inputs, [](const Tensor<T>* t) { return t->requires_grad; });
  }
  return out;
}

template <typename T>
void Tape<T>::record(std::function<void()> backward_fn) {
  if (recording_) ops_.push_back(std::move(backward_fn));
}

template <typename T>
void Tape<T>::backward(const TensorPtr<T>& loss) {
  if (!loss || loss->tape_id != id_) {
    throw std::logic_error("backward called on a value not produced by this tape");
  }
  if (loss->size() != 1) throw std::logic_error("backward requires a scalar loss");
  if (!recording_) throw std::logic_error("backward called on a non-recording tape");
  loss->grad[0] += T{1};
  for (auto& op : std::views::reverse(ops_)) op();
  ops_.clear();
}

template <typename T>
void Tape<T>::note_branch(std::uint64_t h) {
  branch_hash_ ^= h + 0x9e3779b97f4a7c15ULL + (branch_hash_ << 6) + (branch_hash_ >> 2);
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace andikit::ad
