#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dcl/data/slices.hpp"
#include "dcl/losses/memory_bank.hpp"
#include "dcl/tensor.hpp"

namespace dcl::losses {

inline constexpr double kDefaultTemperature = 0.1;
inline constexpr double kDefaultSimilarityThreshold = 0.65;

// Similarity-weighted global contrastive loss over 2B unit embeddings.
//
//   L = sum_i -(1/2B) sum_{j != i} s_ij [s_ij > t] log softmax_{k != i}(<z_i, z_k> / tau)_j
//
// An anchor without positives contributes 0. If no anchor has a positive the
// call throws std::invalid_argument unless `allow_empty` is set, in which case
// the loss is an exact 0 that still depends on Z.
template <typename T>
Tensor<T> gcl_loss(const Tensor<T>& embeddings, const data::SimilarityMatrix& similarity,
                   double threshold, double tau, bool allow_empty = false);

// Per-image mask centers for foreground classes 1..C_fg. Index c - 1 holds
// class c; absent classes have no center and count 0.
template <typename T>
struct MaskCenterSet {
  std::vector<std::optional<Tensor<T>>> centers;  // each a K-vector
  std::vector<std::size_t> counts;

  std::size_t num_foreground() const { return centers.size(); }
  bool present(std::size_t c) const { return centers.at(c - 1).has_value(); }
  const Tensor<T>& center(std::size_t c) const { return *centers.at(c - 1); }
};

// projected: N x K x H x W; mask: N*H*W class ids in 0..C_fg (background 0
// is never given a center).
template <typename T>
std::vector<MaskCenterSet<T>> mask_centers(const Tensor<T>& projected,
                                           const std::vector<std::uint8_t>& mask,
                                           std::size_t num_foreground);

// Appends every present center (as a raw constant vector) to its class buffer.
template <typename T>
void bank_push(MemoryBank& bank, const MaskCenterSet<T>& centers);

// Organ-aware local contrastive loss of one image's (student) centers against
// the bank. Centers and bank vectors are L2-normalised before the cosine
// similarity; the bank contributes constants. Classes that are absent from
// the image or whose buffer is empty contribute 0, so an empty bank yields 0.
template <typename T>
Tensor<T> lcl_loss(const MaskCenterSet<T>& centers, const MemoryBank& bank, double tau);

}  // namespace dcl::losses
