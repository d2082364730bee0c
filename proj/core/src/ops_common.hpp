#pragma once

#include <Eigen/Core>
#include <span>

#include "dcl/tensor.hpp"

namespace dcl {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <typename T, typename Fn>
void accumulate(const Tensor<T>& input, Fn&& fn) {
  if (input.requires_grad()) fn(input.impl().ensure_grad());
}

}  // namespace dcl
