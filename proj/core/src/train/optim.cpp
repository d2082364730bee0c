#include "dcl/train/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dcl::train {

template <typename T>
Sgd<T>::Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd: learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
}

template <typename T>
void Sgd<T>::step(nets::ModelParams<T>& params) {
  for (auto& [name, p] : params) {
    if (!p.requires_grad() || !p.has_grad()) continue;
    auto& v = velocity_[name];
    if (v.empty()) v.assign(p.numel(), 0.0);
    const auto g = p.grad();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = momentum_ * v[i] + static_cast<double>(g[i]);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - lr_ * v[i]);
    }
  }
}

template <typename T>
Adam<T>::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("adam: epsilon must be > 0");
}

template <typename T>
void Adam<T>::step(nets::ModelParams<T>& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [name, p] : params) {
    if (!p.requires_grad() || !p.has_grad()) continue;
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    const auto g = p.grad();
    auto w = p.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      w[i] = static_cast<T>(static_cast<double>(w[i]) - update);
    }
  }
}

template <typename T>
double clip_grad_norm(nets::ModelParams<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (T& g : p.mutable_grad()) g = static_cast<T>(static_cast<double>(g) * scale);
    }
  }
  return norm;
}

template double clip_grad_norm<float>(nets::ModelParams<float>&, double);
template double clip_grad_norm<double>(nets::ModelParams<double>&, double);
template class Sgd<float>;
template class Sgd<double>;
template class Adam<float>;
template class Adam<double>;

}  // namespace dcl::train
