#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcl/tensor.hpp"

namespace dcl {

struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-8;
  // 0 checks every coordinate; otherwise a seeded sample of this many per input.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  // When positive, coordinates are drawn only from entries whose analytic
  // |gradient| is at least this quantile of the input's |gradient| values.
  double min_gradient_quantile = 0.0;
  // Coordinates whose +-step evaluations flip any relu branch or max-pool
  // selection are not smooth there; they are skipped and counted rather than
  // compared.
  bool skip_kink_crossings = true;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst;  // "input#i[flat]" of the largest error
  // Smallest |relu input| seen during the unperturbed evaluation (inf if none).
  double min_relu_margin = 0.0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences. `f` must read the given inputs (which are perturbed in place
// and restored); their requires_grad flag is set and their grads are reset.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> inputs,
                           const GradCheckOptions& options = {});

// Records the relu branch pattern and max-pool selections of every op
// evaluated while alive.
class BranchProbe {
 public:
  BranchProbe();
  ~BranchProbe();
  BranchProbe(const BranchProbe&) = delete;
  BranchProbe& operator=(const BranchProbe&) = delete;

  std::uint64_t pattern_hash() const { return hash_; }
  double min_margin() const { return min_margin_; }

  // Called by relu; no-op when no probe is active on this thread.
  template <typename T>
  static void observe(std::span<const T> inputs);
  // Called by max_pool2x2 with the flat index chosen in each window.
  static void observe_selection(std::span<const std::size_t> chosen);

 private:
  std::uint64_t hash_;
  double min_margin_;
  BranchProbe* previous_;
};

}  // namespace dcl
