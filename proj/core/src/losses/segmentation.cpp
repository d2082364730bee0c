#include "dcl/losses/segmentation.hpp"

#include <stdexcept>
#include <string>

#include "dcl/ops.hpp"

namespace dcl::losses {

template <typename T>
SegmentationLoss<T> dice_ce_loss(const Tensor<T>& logits, const std::vector<std::uint8_t>& labels) {
  if (logits.rank() != 4) {
    throw std::invalid_argument("dice_ce_loss: expects N x C x H x W logits, got " + shape_str(logits.shape()));
  }
  const std::size_t N = logits.dim(0), C = logits.dim(1), plane = logits.dim(2) * logits.dim(3);
  if (labels.size() != N * plane) {
    throw std::invalid_argument("dice_ce_loss: " + std::to_string(labels.size()) + " labels for logits " +
                                shape_str(logits.shape()));
  }
  Tensor<T> onehot(logits.shape());
  auto y = onehot.mutable_data();
  std::vector<T> label_mass(C, T(0));
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t c = labels[n * plane + p];
      if (c >= C) {
        throw std::invalid_argument("dice_ce_loss: label " + std::to_string(c) + " outside 0.." +
                                    std::to_string(C - 1));
      }
      y[(n * C + c) * plane + p] = T(1);
      label_mass[c] += T(1);
    }
  }

  const T eps = static_cast<T>(kDiceSmoothing);
  const auto q = softmax_channels(logits);
  const std::vector<std::size_t> batch_axes{0, 2, 3};
  const auto numerator = add_scalar(scale(sum(mul(q, onehot), batch_axes), T(2)), eps);
  const auto denominator = add_scalar(add(sum(q, batch_axes), Tensor<T>({C}, label_mass)), eps);
  SegmentationLoss<T> out;
  out.dice = add_scalar(scale(mean_all(div(numerator, denominator)), T(-1)), T(1));
  out.ce = scale(sum_all(mul(log_softmax_channels(logits), onehot)),
                 static_cast<T>(-1.0 / static_cast<double>(N * plane)));
  out.total = add(out.dice, out.ce);
  return out;
}

template <typename T>
Tensor<T> consistency_loss(const Tensor<T>& student, const Tensor<T>& teacher) {
  if (student.shape() != teacher.shape()) {
    throw std::invalid_argument("consistency_loss: student " + shape_str(student.shape()) + " vs teacher " +
                                shape_str(teacher.shape()));
  }
  const auto diff = sub(student, teacher.detach());
  return mean_all(mul(diff, diff));
}

template <typename T>
std::vector<std::uint8_t> argmax_channels(const Tensor<T>& scores) {
  if (scores.rank() != 4) {
    throw std::invalid_argument("argmax_channels: expects N x C x H x W, got " + shape_str(scores.shape()));
  }
  const std::size_t N = scores.dim(0), C = scores.dim(1), plane = scores.dim(2) * scores.dim(3);
  if (C > 256) throw std::invalid_argument("argmax_channels: more than 256 classes");
  const auto s = scores.data();
  std::vector<std::uint8_t> out(N * plane, 0);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c)
        if (s[(n * C + c) * plane + p] > s[(n * C + best) * plane + p]) best = c;
      out[n * plane + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

#define DCL_INSTANTIATE_SEGMENTATION(T)                                                             \
  template SegmentationLoss<T> dice_ce_loss(const Tensor<T>&, const std::vector<std::uint8_t>&);    \
  template Tensor<T> consistency_loss(const Tensor<T>&, const Tensor<T>&);                          \
  template std::vector<std::uint8_t> argmax_channels(const Tensor<T>&);

DCL_INSTANTIATE_SEGMENTATION(float)
DCL_INSTANTIATE_SEGMENTATION(double)

}  // namespace dcl::losses
