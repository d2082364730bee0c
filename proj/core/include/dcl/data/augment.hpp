#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "dcl/data/slices.hpp"
#include "dcl/tensor.hpp"

namespace dcl::data {

// Applied in order: horizontal flip, crop to `crop_area` of the image then
// bilinear resize back, intensity scale and shift with clamp to [0, 1],
// additive Gaussian noise (clamped again).
struct AugmentConfig {
  double flip_probability = 0.5;
  double crop_area = 0.875;
  double scale_min = 0.9, scale_max = 1.1;
  double shift_min = -0.1, shift_max = 0.1;
  double noise_sigma = 0.02;

  static AugmentConfig identity() { return {0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }
};

struct AugmentedView {
  Tensor<float> image;                            // H x W
  std::optional<std::vector<std::uint8_t>> label; // same geometry, nearest-neighbour
};

AugmentedView augment_view(const Tensor<float>& image, const std::vector<std::uint8_t>* label,
                           std::mt19937_64& rng, const AugmentConfig& config = {});

// Two independent views of the slice; both inherit its position code.
std::pair<Tensor<float>, Tensor<float>> augment(const SliceRecord& slice, std::mt19937_64& rng,
                                                const AugmentConfig& config = {});

}  // namespace dcl::data
