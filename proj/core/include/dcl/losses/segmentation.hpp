#pragma once

#include <cstdint>
#include <vector>

#include "dcl/tensor.hpp"

namespace dcl::losses {

inline constexpr double kDiceSmoothing = 1e-5;

template <typename T>
struct SegmentationLoss {
  Tensor<T> dice;   // mean over all classes of 1 - soft Dice, background included
  Tensor<T> ce;     // mean per-pixel cross-entropy
  Tensor<T> total;  // dice + ce
};

// logits: N x C x H x W; labels: N*H*W class ids in 0..C-1. Dice sums run
// over the whole batch.
template <typename T>
SegmentationLoss<T> dice_ce_loss(const Tensor<T>& logits, const std::vector<std::uint8_t>& labels);

// Mean squared difference of two probability maps. The teacher side is
// detached, so gradients only reach `student`.
template <typename T>
Tensor<T> consistency_loss(const Tensor<T>& student, const Tensor<T>& teacher);

// Per-pixel argmax over channels of an N x C x H x W tensor (ties pick the
// lowest class).
template <typename T>
std::vector<std::uint8_t> argmax_channels(const Tensor<T>& scores);

}  // namespace dcl::losses
