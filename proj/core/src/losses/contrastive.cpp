#include "dcl/losses/contrastive.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dcl/ops.hpp"

namespace dcl::losses {

template <typename T>
Tensor<T> gcl_loss(const Tensor<T>& z, const data::SimilarityMatrix& s, double threshold, double tau,
                   bool allow_empty) {
  if (!(tau > 0.0)) throw std::invalid_argument("gcl_loss: temperature must be > 0");
  if (z.rank() != 2 || z.dim(0) < 2) {
    throw std::invalid_argument("gcl_loss: expects a 2B x d embedding matrix with 2B >= 2, got " +
                                shape_str(z.shape()));
  }
  const std::size_t n = z.dim(0);
  if (s.size() != n) {
    throw std::invalid_argument("gcl_loss: similarity matrix is " + std::to_string(s.size()) + "^2 for " +
                                std::to_string(n) + " embeddings");
  }

  std::vector<std::uint8_t> off_diagonal(n * n, 1);
  // Negated pair weights -s_ij [s_ij > t] / 2B so the final sum is the loss.
  Tensor<T> weights({n, n});
  auto w = weights.mutable_data();
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i) {
    off_diagonal[i * n + i] = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !(s.at(i, j) > threshold)) continue;
      w[i * n + j] = static_cast<T>(-s.at(i, j) / static_cast<double>(n));
      any_positive = true;
    }
  }
  if (!any_positive && !allow_empty) {
    throw std::invalid_argument("gcl_loss: no pair exceeds the similarity threshold " +
                                std::to_string(threshold) + "; every anchor has an empty positive set");
  }

  const auto logits = scale(matmul(z, transpose(z)), static_cast<T>(1.0 / tau));
  return sum_all(mul(weights, log_softmax_rows(logits, off_diagonal)));
}

template <typename T>
std::vector<MaskCenterSet<T>> mask_centers(const Tensor<T>& projected, const std::vector<std::uint8_t>& mask,
                                           std::size_t num_foreground) {
  if (projected.rank() != 4) {
    throw std::invalid_argument("mask_centers: expects N x K x H x W features, got " +
                                shape_str(projected.shape()));
  }
  const std::size_t N = projected.dim(0), K = projected.dim(1);
  const std::size_t plane = projected.dim(2) * projected.dim(3);
  if (mask.size() != N * plane) {
    throw std::invalid_argument("mask_centers: mask has " + std::to_string(mask.size()) +
                                " entries, features " + shape_str(projected.shape()) + " need " +
                                std::to_string(N * plane));
  }
  for (std::uint8_t c : mask) {
    if (c > num_foreground) {
      throw std::invalid_argument("mask_centers: mask value " + std::to_string(c) + " outside 0.." +
                                  std::to_string(num_foreground));
    }
  }

  std::vector<MaskCenterSet<T>> out(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<std::vector<std::size_t>> pixels(num_foreground + 1);
    for (std::size_t p = 0; p < plane; ++p) pixels[mask[n * plane + p]].push_back(p);
    auto& set = out[n];
    set.centers.resize(num_foreground);
    set.counts.assign(num_foreground, 0);
    for (std::size_t c = 1; c <= num_foreground; ++c) {
      const auto& px = pixels[c];
      set.counts[c - 1] = px.size();
      if (px.empty()) continue;
      std::vector<std::size_t> flat;
      flat.reserve(K * px.size());
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t p : px) flat.push_back((n * K + k) * plane + p);
      set.centers[c - 1] = mean(index_select(projected, flat, {K, px.size()}), {1});
    }
  }
  return out;
}

template <typename T>
void bank_push(MemoryBank& bank, const MaskCenterSet<T>& centers) {
  if (centers.num_foreground() != bank.num_foreground()) {
    throw std::invalid_argument("bank_push: center set has " + std::to_string(centers.num_foreground()) +
                                " classes, bank has " + std::to_string(bank.num_foreground()));
  }
  for (std::size_t c = 1; c <= centers.num_foreground(); ++c) {
    if (!centers.present(c)) continue;
    const auto values = centers.center(c).data();
    bank.push(c, MemoryBank::Vector(values.begin(), values.end()));
  }
}

template <typename T>
Tensor<T> lcl_loss(const MaskCenterSet<T>& centers, const MemoryBank& bank, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("lcl_loss: temperature must be > 0");
  if (centers.num_foreground() != bank.num_foreground()) {
    throw std::invalid_argument("lcl_loss: center set has " + std::to_string(centers.num_foreground()) +
                                " classes, bank has " + std::to_string(bank.num_foreground()));
  }
  const std::size_t K = bank.dim();
  const std::size_t total = bank.total();

  // Normalised bank as a K x total constant, columns grouped by class.
  Tensor<T> keys({K, total});
  std::vector<std::size_t> class_of(total);
  {
    auto kd = keys.mutable_data();
    std::size_t col = 0;
    for (std::size_t c = 1; c <= bank.num_foreground(); ++c) {
      for (const auto& v : bank.buffer(c)) {
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm <= kNormEpsilon) throw std::domain_error("lcl_loss: bank vector has near-zero norm");
        for (std::size_t k = 0; k < K; ++k) kd[k * total + col] = static_cast<T>(v[k] / norm);
        class_of[col++] = c;
      }
    }
  }

  Tensor<T> loss;
  for (std::size_t c = 1; c <= centers.num_foreground(); ++c) {
    if (!centers.present(c) || bank.size(c) == 0) continue;
    const Tensor<T>& center = centers.center(c);
    if (center.numel() != K) {
      throw std::invalid_argument("lcl_loss: center of class " + std::to_string(c) + " has " +
                                  std::to_string(center.numel()) + " entries, bank dim is " +
                                  std::to_string(K));
    }
    const auto u = l2_normalize(reshape(center, {1, K}), 1);
    const auto sims = scale(matmul(u, keys), static_cast<T>(1.0 / tau));  // 1 x total

    std::vector<std::size_t> positives, negatives;
    for (std::size_t j = 0; j < total; ++j) (class_of[j] == c ? positives : negatives).push_back(j);
    // Row r: [positive_r, all negatives]; the loss term is the log-softmax
    // of column 0.
    const std::size_t width = 1 + negatives.size();
    std::vector<std::size_t> rows;
    rows.reserve(positives.size() * width);
    for (std::size_t p : positives) {
      rows.push_back(p);
      rows.insert(rows.end(), negatives.begin(), negatives.end());
    }
    const auto log_probs = log_softmax_rows(index_select(sims, rows, {positives.size(), width}));
    std::vector<std::size_t> first_column(positives.size());
    for (std::size_t r = 0; r < positives.size(); ++r) first_column[r] = r * width;
    const auto term = scale(sum_all(index_select(log_probs, first_column, {positives.size()})),
                            static_cast<T>(-1.0 / static_cast<double>(positives.size())));
    loss = loss.defined() ? add(loss, term) : term;
  }
  return loss.defined() ? loss : Tensor<T>::scalar(T(0));
}

#define DCL_INSTANTIATE_CONTRASTIVE(T)                                                              \
  template Tensor<T> gcl_loss(const Tensor<T>&, const data::SimilarityMatrix&, double, double, bool); \
  template std::vector<MaskCenterSet<T>> mask_centers(const Tensor<T>&, const std::vector<std::uint8_t>&, \
                                                      std::size_t);                                 \
  template void bank_push(MemoryBank&, const MaskCenterSet<T>&);                                    \
  template Tensor<T> lcl_loss(const MaskCenterSet<T>&, const MemoryBank&, double);

DCL_INSTANTIATE_CONTRASTIVE(float)
DCL_INSTANTIATE_CONTRASTIVE(double)

}  // namespace dcl::losses
