#include "dcl/nets/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace dcl::nets {

template <typename T>
void ModelParams<T>::add(const std::string& name, Tensor<T> tensor) {
  if (!tensors_.emplace(name, std::move(tensor)).second) {
    throw std::invalid_argument("params: duplicate parameter name '" + name + "'");
  }
}

template <typename T>
const Tensor<T>& ModelParams<T>::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("params: no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ModelParams<T>::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("params: no parameter named '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t ModelParams<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.numel();
  return n;
}

template <typename T>
std::vector<std::string> ModelParams<T>::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::subtree(const std::string& prefix) const {
  ModelParams out;
  for (const auto& [name, t] : tensors_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.tensors_.emplace(name, t);
  }
  return out;
}

template <typename T>
ModelParams<T> ModelParams<T>::clone(bool requires_grad) const {
  ModelParams out;
  for (const auto& [name, t] : tensors_) {
    Tensor<T> copy = t.detach();
    copy.set_requires_grad(requires_grad);
    out.tensors_.emplace(name, std::move(copy));
  }
  return out;
}

template <typename T>
void ModelParams<T>::set_requires_grad(bool on) {
  for (auto& [name, t] : tensors_) t.set_requires_grad(on);
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

template <typename T>
void copy_values(const ModelParams<T>& src, ModelParams<T>& dst) {
  for (const auto& [name, t] : src) {
    Tensor<T>& target = dst.at(name);
    if (target.shape() != t.shape()) {
      throw std::invalid_argument("params: shape mismatch for '" + name + "': " +
                                  shape_str(t.shape()) + " vs " + shape_str(target.shape()));
    }
    std::copy(t.data().begin(), t.data().end(), target.mutable_data().begin());
  }
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src) {
  ModelParams<To> out;
  for (const auto& [name, t] : src) {
    std::vector<To> values(t.data().begin(), t.data().end());
    Tensor<To> copy(t.shape(), std::move(values));
    copy.set_requires_grad(t.requires_grad());
    out.add(name, std::move(copy));
  }
  return out;
}

template class ModelParams<float>;
template class ModelParams<double>;
template void copy_values(const ModelParams<float>&, ModelParams<float>&);
template void copy_values(const ModelParams<double>&, ModelParams<double>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);

}  // namespace dcl::nets
