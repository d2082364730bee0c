#include "dcl/losses/objective.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dcl/ops.hpp"

namespace dcl::losses {

double lambda3(double step, double total_steps, double peak) {
  if (!(total_steps > 0.0)) throw std::invalid_argument("lambda3: total steps must be > 0");
  if (!(step >= 0.0 && step <= total_steps)) {
    throw std::invalid_argument("lambda3: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(total_steps) + "]");
  }
  if (!(peak >= 0.0)) throw std::invalid_argument("lambda3: peak must be >= 0");
  const double r = 1.0 - step / total_steps;
  return peak * std::exp(-5.0 * r * r);
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !(lambda3_peak >= 0.0)) {
    throw std::invalid_argument("loss weights must be non-negative (lambda1 " + std::to_string(lambda1) +
                                ", lambda2 " + std::to_string(lambda2) + ", lambda3 peak " +
                                std::to_string(lambda3_peak) + ")");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("similarity threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be > 0, got " + std::to_string(tau));
}

template <typename T>
Tensor<T> stage2_total(const Stage2Losses<T>& losses, const LossWeights& weights, double lambda3_value,
                       bool local_active) {
  if (!(weights.lambda1 >= 0.0) || !(weights.lambda2 >= 0.0) || !(lambda3_value >= 0.0)) {
    throw std::invalid_argument("stage2_total: negative loss weight");
  }
  auto total = add(scale(losses.seg, static_cast<T>(weights.lambda2)),
                   scale(losses.cons, static_cast<T>(lambda3_value)));
  if (local_active) {
    if (!losses.lcl.defined()) throw std::invalid_argument("stage2_total: local loss active but not computed");
    total = add(total, scale(losses.lcl, static_cast<T>(weights.lambda1)));
  }
  return total;
}

template Tensor<float> stage2_total(const Stage2Losses<float>&, const LossWeights&, double, bool);
template Tensor<double> stage2_total(const Stage2Losses<double>&, const LossWeights&, double, bool);

}  // namespace dcl::losses
