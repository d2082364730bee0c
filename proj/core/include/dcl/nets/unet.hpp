#pragma once

// Tiny U-shaped segmentation network.
//
//   encoder     three stages of (conv3x3 + relu) x2 then 2x2 max-pool,
//               widths 16 -> 32 -> 64, plus a 128-channel bottleneck
//   head g      global average pool -> linear 128->128 -> relu -> linear 128->d
//               -> l2 normalize (contrastive embedding)
//   decoder     nearest 2x upsample, concat skip, (conv3x3 + relu) x2 per stage;
//               the last stage yields the 16-channel feature map e
//   output      1x1 conv e -> C_fg + 1 logits
//   projection  1x1 conv e -> K (per-pixel features for mask centers)

#include <array>
#include <cstdint>
#include <string>

#include "dcl/nets/params.hpp"
#include "dcl/tensor.hpp"

namespace dcl::nets {

struct UNetConfig {
  std::size_t in_channels = 1;
  std::size_t num_classes = 4;  // foreground organs + background
  std::array<std::size_t, 3> widths{16, 32, 64};
  std::size_t bottleneck = 128;
  std::size_t head_hidden = 128;
  std::size_t embed_dim = 64;   // d
  std::size_t proj_dim = 32;    // K
};

inline const std::string kEncoderPrefix = "encoder.";
inline const std::string kHeadPrefix = "head.";

template <typename T>
struct EncoderOutput {
  Tensor<T> bottleneck;
  std::array<Tensor<T>, 3> skips;  // full, 1/2, 1/4 resolution
};

template <typename T>
struct DecoderOutput {
  Tensor<T> features;  // e: N x widths[0] x H x W
  Tensor<T> logits;    // N x num_classes x H x W
};

// Parameter groups, He-uniform weights and zero biases.
template <typename T>
ModelParams<T> init_encoder(const UNetConfig& config, std::uint64_t seed);
template <typename T>
ModelParams<T> init_head(const UNetConfig& config, std::uint64_t seed);
// Decoder, projection layer and output head.
template <typename T>
ModelParams<T> init_segmentation_tail(const UNetConfig& config, std::uint64_t seed);

// Number of scalars in encoder + head + decoder + projection + output.
std::size_t unet_parameter_count(const UNetConfig& config);

template <typename T>
EncoderOutput<T> encoder_forward(const ModelParams<T>& params, const Tensor<T>& images);
template <typename T>
Tensor<T> projection_head_forward(const ModelParams<T>& params, const Tensor<T>& bottleneck);
template <typename T>
DecoderOutput<T> decoder_forward(const ModelParams<T>& params, const EncoderOutput<T>& encoded);
template <typename T>
Tensor<T> projection_layer_forward(const ModelParams<T>& params, const Tensor<T>& features);

}  // namespace dcl::nets
