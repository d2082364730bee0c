#include "dcl/data/slices.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace dcl::data {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kLabeled: return "labeled";
    case Split::kUnlabeled: return "unlabeled";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kLabeled, Split::kUnlabeled, Split::kVal, Split::kTest}) {
    if (split_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

std::vector<SliceRecord> slice_volume(const Tensor<float>& volume,
                                      const std::vector<std::uint8_t>& labels,
                                      const std::string& volume_id, Split split) {
  if (volume.rank() != 3) {
    throw std::invalid_argument("slice_volume: expects D x H x W, got " + shape_str(volume.shape()));
  }
  if (labels.size() != volume.numel()) {
    throw std::invalid_argument("slice_volume: " + std::to_string(labels.size()) +
                                " labels for volume " + shape_str(volume.shape()));
  }
  const std::size_t D = volume.dim(0), H = volume.dim(1), W = volume.dim(2);
  if (D < 2) throw std::invalid_argument("slice_volume: depth < 2 leaves position codes undefined");
  std::vector<SliceRecord> out;
  out.reserve(D);
  const std::size_t plane = H * W;
  for (std::size_t k = 0; k < D; ++k) {
    SliceRecord r;
    auto values = volume.data().subspan(k * plane, plane);
    r.image = Tensor<float>({H, W}, std::vector<float>(values.begin(), values.end()));
    r.position = static_cast<double>(k) / static_cast<double>(D - 1);
    r.volume_id = volume_id;
    r.slice_index = k;
    r.split = split;
    if (split != Split::kUnlabeled) {
      r.label.emplace(labels.begin() + static_cast<std::ptrdiff_t>(k * plane),
                      labels.begin() + static_cast<std::ptrdiff_t>((k + 1) * plane));
    }
    out.push_back(std::move(r));
  }
  return out;
}

double similarity(double p_i, double p_j) {
  if (!(p_i >= 0.0 && p_i <= 1.0) || !(p_j >= 0.0 && p_j <= 1.0)) {
    throw std::invalid_argument("similarity: positions must lie in [0, 1], got " +
                                std::to_string(p_i) + ", " + std::to_string(p_j));
  }
  return 1.0 - std::abs(p_i - p_j);
}

SimilarityMatrix::SimilarityMatrix(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (values_.size() != n * n) throw std::invalid_argument("SimilarityMatrix: size mismatch");
}

SimilarityMatrix similarity_matrix(const std::vector<double>& positions) {
  const std::size_t n = positions.size();
  if (n < 2) throw std::invalid_argument("similarity_matrix: needs at least 2 positions");
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) values[i * n + j] = similarity(positions[i], positions[j]);
  return SimilarityMatrix(n, std::move(values));
}

std::optional<Split> SplitAssignment::split_of(std::size_t volume) const {
  auto in = [volume](const std::vector<std::size_t>& v) {
    return std::binary_search(v.begin(), v.end(), volume);
  };
  if (in(labeled)) return Split::kLabeled;
  if (in(unlabeled)) return Split::kUnlabeled;
  if (in(val)) return Split::kVal;
  if (in(test)) return Split::kTest;
  return std::nullopt;
}

SplitAssignment split_dataset(std::size_t volume_count, std::size_t labeled, std::size_t unlabeled,
                              std::size_t val, std::size_t test, std::uint64_t seed) {
  if (labeled < 1) throw std::invalid_argument("split_dataset: need at least one labeled volume");
  const std::size_t needed = labeled + unlabeled + val + test;
  if (needed > volume_count) {
    throw std::invalid_argument("split_dataset: " + std::to_string(needed) + " volumes requested, " +
                                std::to_string(volume_count) + " available");
  }
  std::vector<std::size_t> order(volume_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  SplitAssignment a;
  auto take = [&, next = std::size_t{0}](std::vector<std::size_t>& dst, std::size_t n) mutable {
    dst.assign(order.begin() + static_cast<std::ptrdiff_t>(next),
               order.begin() + static_cast<std::ptrdiff_t>(next + n));
    std::sort(dst.begin(), dst.end());
    next += n;
  };
  take(a.labeled, labeled);
  take(a.unlabeled, unlabeled);
  take(a.val, val);
  take(a.test, test);
  return a;
}

}  // namespace dcl::data
