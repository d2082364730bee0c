#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle onto shared storage. Operations that consume at
// least one gradient-requiring input record a Node; backward() collects the
// nodes reachable from a scalar loss into a Tape ordered by execution and
// replays it in reverse.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcl {

using Shape = std::vector<std::size_t>;

enum class Precision : std::uint8_t { kSingle = 1, kDouble = 2 };

template <typename T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::kSingle : Precision::kDouble;
}

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct TensorImpl;

template <typename T>
struct Node {
  std::uint64_t sequence = 0;
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl<T>>> inputs;
  std::weak_ptr<TensorImpl<T>> output;
  // Reads output grad, accumulates into the grads of inputs that require one.
  std::function<void(const TensorImpl<T>& out)> backward;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // sized lazily, only when requires_grad
  bool requires_grad = false;
  std::shared_ptr<Node<T>> producer;  // null for leaves

  std::span<T> ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

std::uint64_t next_sequence();

}  // namespace detail

// Disables recording for its lifetime (teacher forward passes, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, T value) { return Tensor(std::move(shape), value); }
  static Tensor scalar(T value) { return Tensor(Shape{}, value); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl().data.size(); }
  static constexpr Precision precision() { return precision_of<T>(); }

  std::span<const T> data() const { return impl().data; }
  // Direct write access; intended for leaves (parameters, inputs) only.
  std::span<T> mutable_data() { return impl().data; }
  T item() const;
  T at(std::size_t flat) const { return impl().data.at(flat); }

  bool requires_grad() const { return impl().requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl().producer == nullptr; }
  bool has_grad() const { return !impl().grad.empty(); }
  // Zeros when requires_grad is set but nothing has been accumulated yet.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  // New leaf holding a copy of the values; no gradient link.
  Tensor detach() const;
  Tensor clone() const { return detach(); }
  const char* producer_op() const;

  detail::TensorImpl<T>& impl() const;
  const std::shared_ptr<detail::TensorImpl<T>>& impl_ptr() const { return impl_; }
  static Tensor wrap(std::shared_ptr<detail::TensorImpl<T>> impl);

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

// Reverse-execution-ordered record of the operations that produced a loss.
template <typename T>
class Tape {
 public:
  static Tape collect(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  // Nodes in execution order (oldest first).
  const std::vector<std::shared_ptr<detail::Node<T>>>& nodes() const { return nodes_; }
  // Visits every node once, newest first. Returns the op names in visit order.
  std::vector<const char*> replay_backward() const;

 private:
  std::vector<std::shared_ptr<detail::Node<T>>> nodes_;
};

// Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor that
// requires grad. Leaf grads accumulate across calls; intermediate grads are
// reset at the start of each call.
template <typename T>
void backward(const Tensor<T>& loss);

// Builds an op output, recording a node when grad mode is on and any input
// requires grad. The callback receives the output impl during backward.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(const detail::TensorImpl<T>&)> backward_fn);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace dcl
