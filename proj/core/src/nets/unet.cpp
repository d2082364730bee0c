#include "dcl/nets/unet.hpp"

#include <cmath>
#include <random>

#include "dcl/ops.hpp"

namespace dcl::nets {

namespace {

template <typename T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (T& v : t.mutable_data()) v = static_cast<T>(dist(rng));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Tensor<T> zero_bias(std::size_t n) {
  Tensor<T> t(Shape{n});
  t.set_requires_grad(true);
  return t;
}

template <typename T>
void add_conv(ModelParams<T>& p, const std::string& name, std::size_t in, std::size_t out,
              std::size_t k, std::mt19937_64& rng) {
  p.add(name + ".weight", he_uniform<T>({out, in, k, k}, in * k * k, rng));
  p.add(name + ".bias", zero_bias<T>(out));
}

template <typename T>
void add_linear(ModelParams<T>& p, const std::string& name, std::size_t in, std::size_t out,
                std::mt19937_64& rng) {
  p.add(name + ".weight", he_uniform<T>({in, out}, in, rng));
  p.add(name + ".bias", zero_bias<T>(out));
}

template <typename T>
Tensor<T> conv(const ModelParams<T>& p, const std::string& name, const Tensor<T>& x,
               std::size_t padding) {
  return add_bias(conv2d(x, p.at(name + ".weight"), 1, padding), p.at(name + ".bias"));
}

template <typename T>
Tensor<T> double_conv(const ModelParams<T>& p, const std::string& block, const Tensor<T>& x) {
  auto h = relu(conv(p, block + ".conv1", x, 1));
  return relu(conv(p, block + ".conv2", h, 1));
}

const char* const kEncoderBlocks[3] = {"encoder.block1", "encoder.block2", "encoder.block3"};
const char* const kDecoderBlocks[3] = {"decoder.up1", "decoder.up2", "decoder.up3"};

}  // namespace

template <typename T>
ModelParams<T> init_encoder(const UNetConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams<T> p;
  std::size_t in = c.in_channels;
  for (std::size_t s = 0; s < 3; ++s) {
    add_conv(p, std::string(kEncoderBlocks[s]) + ".conv1", in, c.widths[s], 3, rng);
    add_conv(p, std::string(kEncoderBlocks[s]) + ".conv2", c.widths[s], c.widths[s], 3, rng);
    in = c.widths[s];
  }
  add_conv(p, "encoder.bottleneck.conv1", in, c.bottleneck, 3, rng);
  add_conv(p, "encoder.bottleneck.conv2", c.bottleneck, c.bottleneck, 3, rng);
  return p;
}

template <typename T>
ModelParams<T> init_head(const UNetConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  ModelParams<T> p;
  add_linear(p, "head.fc1", c.bottleneck, c.head_hidden, rng);
  add_linear(p, "head.fc2", c.head_hidden, c.embed_dim, rng);
  return p;
}

template <typename T>
ModelParams<T> init_segmentation_tail(const UNetConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4full);
  ModelParams<T> p;
  std::size_t below = c.bottleneck;
  for (std::size_t s = 3; s-- > 0;) {
    const std::string block = kDecoderBlocks[s];
    add_conv(p, block + ".conv1", below + c.widths[s], c.widths[s], 3, rng);
    add_conv(p, block + ".conv2", c.widths[s], c.widths[s], 3, rng);
    below = c.widths[s];
  }
  add_conv(p, "projection", c.widths[0], c.proj_dim, 1, rng);
  add_conv(p, "output", c.widths[0], c.num_classes, 1, rng);
  return p;
}

std::size_t unet_parameter_count(const UNetConfig& c) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; };
  std::size_t n = 0;
  std::size_t in = c.in_channels;
  for (std::size_t s = 0; s < 3; ++s) {
    n += conv(in, c.widths[s], 3) + conv(c.widths[s], c.widths[s], 3);
    in = c.widths[s];
  }
  n += conv(in, c.bottleneck, 3) + conv(c.bottleneck, c.bottleneck, 3);
  n += c.bottleneck * c.head_hidden + c.head_hidden + c.head_hidden * c.embed_dim + c.embed_dim;
  std::size_t below = c.bottleneck;
  for (std::size_t s = 3; s-- > 0;) {
    n += conv(below + c.widths[s], c.widths[s], 3) + conv(c.widths[s], c.widths[s], 3);
    below = c.widths[s];
  }
  n += conv(c.widths[0], c.proj_dim, 1) + conv(c.widths[0], c.num_classes, 1);
  return n;
}

template <typename T>
EncoderOutput<T> encoder_forward(const ModelParams<T>& params, const Tensor<T>& images) {
  if (images.rank() != 4) {
    throw std::invalid_argument("encoder_forward: expects N x C x H x W, got " +
                                shape_str(images.shape()));
  }
  if (images.dim(2) % 8 != 0 || images.dim(3) % 8 != 0) {
    throw std::invalid_argument("encoder_forward: spatial dims " + std::to_string(images.dim(2)) +
                                "x" + std::to_string(images.dim(3)) + " not divisible by 8");
  }
  EncoderOutput<T> out;
  Tensor<T> x = images;
  for (std::size_t s = 0; s < 3; ++s) {
    out.skips[s] = double_conv(params, kEncoderBlocks[s], x);
    x = max_pool2x2(out.skips[s]);
  }
  out.bottleneck = double_conv(params, std::string("encoder.bottleneck"), x);
  return out;
}

template <typename T>
Tensor<T> projection_head_forward(const ModelParams<T>& params, const Tensor<T>& bottleneck) {
  if (bottleneck.rank() != 4) {
    throw std::invalid_argument("projection_head_forward: expects N x C x h x w, got " +
                                shape_str(bottleneck.shape()));
  }
  auto pooled = mean(bottleneck, {2, 3});
  auto hidden = relu(add_bias(matmul(pooled, params.at("head.fc1.weight")),
                              params.at("head.fc1.bias")));
  auto z = add_bias(matmul(hidden, params.at("head.fc2.weight")), params.at("head.fc2.bias"));
  return l2_normalize(z, 1);
}

template <typename T>
DecoderOutput<T> decoder_forward(const ModelParams<T>& params, const EncoderOutput<T>& encoded) {
  Tensor<T> x = encoded.bottleneck;
  for (std::size_t s = 3; s-- > 0;) {
    auto up = upsample_nearest2x(x);
    const auto& skip = encoded.skips[s];
    if (up.dim(0) != skip.dim(0) || up.dim(2) != skip.dim(2) || up.dim(3) != skip.dim(3)) {
      throw std::invalid_argument("decoder_forward: upsampled " + shape_str(up.shape()) +
                                  " does not match skip " + shape_str(skip.shape()));
    }
    x = double_conv(params, kDecoderBlocks[s], concat_channels(up, skip));
  }
  DecoderOutput<T> out;
  out.features = x;
  out.logits = conv(params, "output", x, 0);
  return out;
}

template <typename T>
Tensor<T> projection_layer_forward(const ModelParams<T>& params, const Tensor<T>& features) {
  return conv(params, "projection", features, 0);
}

#define DCL_INSTANTIATE_UNET(T)                                                              \
  template ModelParams<T> init_encoder<T>(const UNetConfig&, std::uint64_t);                 \
  template ModelParams<T> init_head<T>(const UNetConfig&, std::uint64_t);                    \
  template ModelParams<T> init_segmentation_tail<T>(const UNetConfig&, std::uint64_t);       \
  template EncoderOutput<T> encoder_forward(const ModelParams<T>&, const Tensor<T>&);        \
  template Tensor<T> projection_head_forward(const ModelParams<T>&, const Tensor<T>&);       \
  template DecoderOutput<T> decoder_forward(const ModelParams<T>&, const EncoderOutput<T>&); \
  template Tensor<T> projection_layer_forward(const ModelParams<T>&, const Tensor<T>&);

DCL_INSTANTIATE_UNET(float)
DCL_INSTANTIATE_UNET(double)

}  // namespace dcl::nets
