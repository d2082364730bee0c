#pragma once

// Synthetic multi-organ phantoms: nested ellipsoidal organs whose cross
// sections shrink and drift monotonically with depth, so neighbouring slices
// look alike and distant slices differ.

#include <cstdint>
#include <vector>

#include "dcl/tensor.hpp"

namespace dcl::data {

struct PhantomSpec {
  std::size_t depth = 16;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t organs = 3;       // C_fg, labels 1..organs
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  // Background blobs sharing organ intensities but carrying label 0.
  std::size_t distractors = 2;
  // Peak amplitude of the smooth multiplicative bias field.
  double bias_field = 0.1;
};

struct Phantom {
  Tensor<float> intensity;            // D x H x W, values in [0, 1]
  std::vector<std::uint8_t> labels;   // D*H*W, row-major, values 0..organs
  std::vector<double> organ_means;    // noiseless mean intensity per organ (index c-1)
};

// Throws std::invalid_argument when the spec is malformed or the organs do
// not fit (outside the image, or an organ covering < 1% of a slice in more
// than half the slices).
Phantom gen_phantom(const PhantomSpec& spec);

}  // namespace dcl::data
