#pragma once

#include <cstddef>

#include "dcl/tensor.hpp"

namespace dcl::losses {

inline constexpr double kLambda3Peak = 0.1;

// Consistency warm-up: peak * exp(-5 (1 - step / total_steps)^2).
// Requires 0 <= step <= total_steps and total_steps > 0.
double lambda3(double step, double total_steps, double peak = kLambda3Peak);

struct LossWeights {
  double lambda1 = 0.01;               // local contrastive
  double lambda2 = 1.0;                // supervised segmentation
  double lambda3_peak = kLambda3Peak;  // consistency warm-up peak
  double threshold = 0.65;             // similarity threshold t
  double tau = 0.1;                    // contrastive temperature

  // Throws std::invalid_argument on negative weights, t outside (0, 1) or
  // tau <= 0.
  void validate() const;
};

template <typename T>
struct Stage2Losses {
  Tensor<T> lcl;   // may be undefined while the local loss is gated off
  Tensor<T> seg;
  Tensor<T> cons;
};

// lambda1 * lcl (only when local_active) + lambda2 * seg + lambda3 * cons.
// `lambda3_value` is the already-scheduled weight.
template <typename T>
Tensor<T> stage2_total(const Stage2Losses<T>& losses, const LossWeights& weights,
                       double lambda3_value, bool local_active);

}  // namespace dcl::losses
