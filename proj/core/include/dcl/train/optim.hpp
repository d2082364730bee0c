#pragma once

#include <map>
#include <string>
#include <vector>

#include "dcl/nets/params.hpp"

namespace dcl::train {

// Heavy-ball SGD: v <- momentum * v + g; p <- p - lr * v.
// Parameters without a gradient are left untouched.
template <typename T>
class Sgd {
 public:
  Sgd(double lr, double momentum);
  void step(nets::ModelParams<T>& params);

 private:
  double lr_, momentum_;
  std::map<std::string, std::vector<double>> velocity_;
};

// Bias-corrected Adam.
template <typename T>
class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(nets::ModelParams<T>& params);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// Rescales all gradients together so their global L2 norm is at most
// `max_norm`; returns the norm before rescaling. `max_norm` <= 0 only measures.
template <typename T>
double clip_grad_norm(nets::ModelParams<T>& params, double max_norm);

}  // namespace dcl::train
