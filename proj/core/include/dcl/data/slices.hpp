#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dcl/tensor.hpp"

namespace dcl::data {

enum class Split : std::uint8_t { kLabeled, kUnlabeled, kVal, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

// One 2-D slice of a volume. `label` is present iff the split is labeled,
// val or test.
struct SliceRecord {
  Tensor<float> image;                            // H x W in [0, 1]
  double position = 0.0;                          // slice_index / (D - 1)
  std::string volume_id;
  std::size_t slice_index = 0;
  std::optional<std::vector<std::uint8_t>> label; // H*W class ids
  Split split = Split::kLabeled;

  std::size_t height() const { return image.dim(0); }
  std::size_t width() const { return image.dim(1); }
};

// Splits a D x H x W volume into D records with position codes k / (D - 1).
// Labels are dropped for the unlabeled split.
std::vector<SliceRecord> slice_volume(const Tensor<float>& volume,
                                      const std::vector<std::uint8_t>& labels,
                                      const std::string& volume_id, Split split = Split::kLabeled);

// 1 - |p_i - p_j| for positions in [0, 1].
double similarity(double p_i, double p_j);

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t n, std::vector<double> values);

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

SimilarityMatrix similarity_matrix(const std::vector<double>& positions);

// Volume-level assignment; volume indices per split, each sorted.
struct SplitAssignment {
  std::vector<std::size_t> labeled, unlabeled, val, test;
  std::optional<Split> split_of(std::size_t volume) const;
};

SplitAssignment split_dataset(std::size_t volume_count, std::size_t labeled, std::size_t unlabeled,
                              std::size_t val, std::size_t test, std::uint64_t seed);

}  // namespace dcl::data
