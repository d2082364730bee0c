#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcl/tensor.hpp"

namespace dcl::nets {

// Named parameter tensors, iterated in lexicographic name order.
template <typename T>
class ModelParams {
 public:
  using Map = std::map<std::string, Tensor<T>>;

  void add(const std::string& name, Tensor<T> tensor);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor<T>& at(const std::string& name) const;
  Tensor<T>& at(const std::string& name);

  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  // Tensors whose name starts with prefix; handles are shared, not copied.
  ModelParams subtree(const std::string& prefix) const;
  // Deep copy with fresh storage and the given requires_grad flag.
  ModelParams clone(bool requires_grad) const;
  void set_requires_grad(bool on);
  void zero_grad();

  typename Map::const_iterator begin() const { return tensors_.begin(); }
  typename Map::const_iterator end() const { return tensors_.end(); }
  typename Map::iterator begin() { return tensors_.begin(); }
  typename Map::iterator end() { return tensors_.end(); }

 private:
  Map tensors_;
};

// Copies values (not handles) from src into dst for every name in src.
template <typename T>
void copy_values(const ModelParams<T>& src, ModelParams<T>& dst);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src);

extern template class ModelParams<float>;
extern template class ModelParams<double>;

}  // namespace dcl::nets
