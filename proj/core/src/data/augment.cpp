#include "dcl/data/augment.hpp"

#include <algorithm>
#include <cmath>

namespace dcl::data {

AugmentedView augment_view(const Tensor<float>& image, const std::vector<std::uint8_t>* label,
                           std::mt19937_64& rng, const AugmentConfig& config) {
  if (image.rank() != 2) {
    throw std::invalid_argument("augment: expects an H x W image, got " + shape_str(image.shape()));
  }
  const std::size_t H = image.dim(0), W = image.dim(1);
  if (label && label->size() != H * W) throw std::invalid_argument("augment: label size mismatch");
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const bool flip = unit(rng) < config.flip_probability;
  const double side = std::sqrt(std::clamp(config.crop_area, 0.0, 1.0));
  const std::size_t ch = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(side * H)));
  const std::size_t cw = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(side * W)));
  const std::size_t oy = std::uniform_int_distribution<std::size_t>(0, H - std::min(ch, H))(rng);
  const std::size_t ox = std::uniform_int_distribution<std::size_t>(0, W - std::min(cw, W))(rng);
  const double gain = config.scale_min + (config.scale_max - config.scale_min) * unit(rng);
  const double shift = config.shift_min + (config.shift_max - config.shift_min) * unit(rng);

  auto src = image.data();
  auto sample = [&](std::size_t y, std::size_t x) {
    return static_cast<double>(src[y * W + (flip ? W - 1 - x : x)]);
  };
  // Align-corners mapping from output grid into the crop window.
  auto source_coord = [](std::size_t o, std::size_t out_len, std::size_t crop_len, std::size_t offset) {
    if (out_len == 1) return static_cast<double>(offset);
    return static_cast<double>(offset) +
           static_cast<double>(o * (crop_len - 1)) / static_cast<double>(out_len - 1);
  };

  AugmentedView view;
  view.image = Tensor<float>({H, W});
  auto dst = view.image.mutable_data();
  std::normal_distribution<double> noise(0.0, config.noise_sigma > 0 ? config.noise_sigma : 1.0);
  if (label) view.label.emplace(H * W);
  for (std::size_t y = 0; y < H; ++y) {
    const double sy = source_coord(y, H, ch, oy);
    const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < W; ++x) {
      const double sx = source_coord(x, W, cw, ox);
      const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double fx = sx - static_cast<double>(x0);
      double v = (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x1)) +
                 fy * ((1 - fx) * sample(y1, x0) + fx * sample(y1, x1));
      v = std::clamp(v * gain + shift, 0.0, 1.0);
      if (config.noise_sigma > 0) v = std::clamp(v + noise(rng), 0.0, 1.0);
      dst[y * W + x] = static_cast<float>(v);
      if (label) {
        const std::size_t ny = std::min<std::size_t>(static_cast<std::size_t>(std::lround(sy)), H - 1);
        const std::size_t nx = std::min<std::size_t>(static_cast<std::size_t>(std::lround(sx)), W - 1);
        (*view.label)[y * W + x] = (*label)[ny * W + (flip ? W - 1 - nx : nx)];
      }
    }
  }
  return view;
}

std::pair<Tensor<float>, Tensor<float>> augment(const SliceRecord& slice, std::mt19937_64& rng,
                                                const AugmentConfig& config) {
  auto a = augment_view(slice.image, nullptr, rng, config);
  auto b = augment_view(slice.image, nullptr, rng, config);
  return {std::move(a.image), std::move(b.image)};
}

}  // namespace dcl::data
