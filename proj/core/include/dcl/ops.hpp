#pragma once

// Differentiable operations over Tensor. Shapes are checked eagerly and
// mismatches throw std::invalid_argument naming the offending dimensions.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dcl/tensor.hpp"

namespace dcl {

inline constexpr double kNormEpsilon = 1e-8;

// Elementwise, identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
// Subgradient at 0 is 0.
template <typename T> Tensor<T> relu(const Tensor<T>& x);

// Adds b[c] to every element of x whose axis-1 index is c (NCHW or NxF).
template <typename T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

// (m x k) * (k x n).
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// input N x C x H x W, kernel O x C x Kh x Kw.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t stride,
                 std::size_t padding);
template <typename T> Tensor<T> upsample_nearest2x(const Tensor<T>& x);
template <typename T> Tensor<T> max_pool2x2(const Tensor<T>& x);
template <typename T> Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// Softmax over axis 1 of an N x C x H x W tensor, max-subtracted.
template <typename T> Tensor<T> softmax_channels(const Tensor<T>& logits);
template <typename T> Tensor<T> log_softmax_channels(const Tensor<T>& logits);
// Row-wise log-softmax of an m x n matrix over the entries where include is
// non-zero. Excluded entries yield 0 and receive no gradient. A row with no
// included entry yields all zeros.
template <typename T>
Tensor<T> log_softmax_rows(const Tensor<T>& x, const std::vector<std::uint8_t>& include = {});

// Unit L2 norm along axis; throws std::domain_error when a norm <= 1e-8.
template <typename T> Tensor<T> l2_normalize(const Tensor<T>& v, std::size_t axis);

// Reductions drop the reduced axes; reducing everything yields a rank-0 scalar.
template <typename T> Tensor<T> sum(const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <typename T> Tensor<T> mean(const Tensor<T>& x, const std::vector<std::size_t>& axes);
template <typename T> Tensor<T> sum_all(const Tensor<T>& x);
template <typename T> Tensor<T> mean_all(const Tensor<T>& x);

// x[index] along axis 0.
template <typename T> Tensor<T> select(const Tensor<T>& x, std::size_t index);
// Gathers flat elements of x into a tensor of the given shape.
template <typename T>
Tensor<T> index_select(const Tensor<T>& x, const std::vector<std::size_t>& flat_indices,
                       Shape shape);
// 1-D tensor of the elements where mask is non-zero (mask has x's numel).
template <typename T>
Tensor<T> masked_select(const Tensor<T>& x, const std::vector<std::uint8_t>& mask);
// Concatenates along axis 0; trailing shapes must agree.
template <typename T> Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

}  // namespace dcl
