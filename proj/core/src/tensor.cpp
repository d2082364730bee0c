#include "dcl/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace dcl {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::uint64_t next_sequence() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

}  // namespace detail

namespace {
thread_local bool g_grad_mode = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }
bool grad_mode_enabled() { return g_grad_mode; }

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  if (values.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
detail::TensorImpl<T>& Tensor<T>::impl() const {
  if (!impl_) throw std::logic_error("tensor: use of undefined tensor");
  return *impl_;
}

template <typename T>
Tensor<T> Tensor<T>::wrap(std::shared_ptr<detail::TensorImpl<T>> impl) {
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const auto& s = impl().shape;
  if (axis >= s.size()) {
    throw std::out_of_range("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                            shape_str(s));
  }
  return s[axis];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("tensor: item() on shape " + shape_str(shape()));
  }
  return impl().data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  auto& im = impl();
  if (!on && im.producer) {
    throw std::logic_error("tensor: cannot clear requires_grad on a non-leaf");
  }
  im.requires_grad = on;
  if (!on) im.grad.clear();
  return *this;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  auto& im = impl();
  if (!im.requires_grad) throw std::logic_error("tensor: grad() on tensor without requires_grad");
  return im.ensure_grad();
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  auto& im = impl();
  if (!im.requires_grad) throw std::logic_error("tensor: grad on tensor without requires_grad");
  return im.ensure_grad();
}

template <typename T>
void Tensor<T>::zero_grad() {
  auto& im = impl();
  if (im.requires_grad) im.grad.assign(im.data.size(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(impl().shape, impl().data);
}

template <typename T>
const char* Tensor<T>::producer_op() const {
  return impl().producer ? impl().producer->op : "leaf";
}

template <typename T>
Tape<T> Tape<T>::collect(const Tensor<T>& loss) {
  Tape tape;
  std::unordered_set<const detail::Node<T>*> seen;
  std::vector<std::shared_ptr<detail::Node<T>>> stack;
  if (loss.impl().producer) stack.push_back(loss.impl().producer);
  while (!stack.empty()) {
    auto node = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(node.get()).second) continue;
    for (const auto& in : node->inputs) {
      if (in->producer && !seen.count(in->producer.get())) stack.push_back(in->producer);
    }
    tape.nodes_.push_back(std::move(node));
  }
  // Producers are always created before consumers, so sequence order is a
  // valid topological order.
  std::sort(tape.nodes_.begin(), tape.nodes_.end(),
            [](const auto& a, const auto& b) { return a->sequence < b->sequence; });
  return tape;
}

template <typename T>
std::vector<const char*> Tape<T>::replay_backward() const {
  std::vector<const char*> visited;
  visited.reserve(nodes_.size());
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    const auto& node = *it;
    auto out = node->output.lock();
    if (!out) throw std::logic_error("tape: output of recorded op expired");
    visited.push_back(node->op);
    // An output that never received gradient contributes nothing.
    if (out->grad.empty()) continue;
    node->backward(*out);
  }
  return visited;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  }
  auto& root = loss.impl();
  if (!root.requires_grad) return;
  Tape<T> tape = Tape<T>::collect(loss);
  for (const auto& node : tape.nodes()) {
    if (auto out = node->output.lock()) out->grad.clear();
  }
  root.ensure_grad()[0] += T(1);
  tape.replay_backward();
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> values,
                      std::vector<Tensor<T>> inputs,
                      std::function<void(const detail::TensorImpl<T>&)> backward_fn) {
  Tensor<T> out(std::move(shape), std::move(values));
  if (!grad_mode_enabled()) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = std::make_shared<detail::Node<T>>();
  node->sequence = detail::next_sequence();
  node->op = op;
  node->inputs.reserve(inputs.size());
  for (const auto& in : inputs) node->inputs.push_back(in.impl_ptr());
  node->output = out.impl_ptr();
  node->backward = std::move(backward_fn);
  out.impl().requires_grad = true;
  out.impl().producer = std::move(node);
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<float> make_result(const char*, Shape, std::vector<float>, std::vector<Tensor<float>>,
                                   std::function<void(const detail::TensorImpl<float>&)>);
template Tensor<double> make_result(const char*, Shape, std::vector<double>,
                                    std::vector<Tensor<double>>,
                                    std::function<void(const detail::TensorImpl<double>&)>);

}  // namespace dcl
