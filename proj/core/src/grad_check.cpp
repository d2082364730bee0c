#include "dcl/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace dcl {

namespace {
thread_local BranchProbe* g_active_probe = nullptr;
constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;
}  // namespace

BranchProbe::BranchProbe()
    : hash_(kFnvOffset), min_margin_(std::numeric_limits<double>::infinity()),
      previous_(g_active_probe) {
  g_active_probe = this;
}

BranchProbe::~BranchProbe() { g_active_probe = previous_; }

template <typename T>
void BranchProbe::observe(std::span<const T> inputs) {
  BranchProbe* probe = g_active_probe;
  if (!probe) return;
  std::uint64_t h = probe->hash_;
  double margin = probe->min_margin_;
  for (T v : inputs) {
    h = (h ^ static_cast<std::uint64_t>(v > T(0))) * kFnvPrime;
    margin = std::min(margin, static_cast<double>(std::abs(v)));
  }
  probe->hash_ = h;
  probe->min_margin_ = margin;
}

void BranchProbe::observe_selection(std::span<const std::size_t> chosen) {
  BranchProbe* probe = g_active_probe;
  if (!probe) return;
  std::uint64_t h = probe->hash_;
  for (std::size_t k : chosen) h = (h ^ static_cast<std::uint64_t>(k)) * kFnvPrime;
  probe->hash_ = h;
}

template void BranchProbe::observe<float>(std::span<const float>);
template void BranchProbe::observe<double>(std::span<const double>);

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> inputs,
                           const GradCheckOptions& options) {
  GradCheckResult result;
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  std::uint64_t base_pattern = 0;
  {
    BranchProbe probe;
    Tensor<T> loss = f();
    if (loss.numel() != 1) {
      throw std::invalid_argument("grad_check: function must be scalar-valued, got shape " +
                                  shape_str(loss.shape()));
    }
    backward(loss);
    base_pattern = probe.pattern_hash();
    result.min_relu_margin = probe.min_margin();
  }

  auto evaluate = [&](std::uint64_t& pattern) {
    NoGradGuard no_grad;
    BranchProbe probe;
    const double value = static_cast<double>(f().item());
    pattern = probe.pattern_hash();
    return value;
  };

  std::mt19937_64 rng(options.seed);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto& in = inputs[i];
    const std::vector<T> analytic(in.grad().begin(), in.grad().end());
    std::vector<std::size_t> coords(in.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.min_gradient_quantile > 0.0 && !coords.empty()) {
      std::vector<double> mags(analytic.size());
      for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(static_cast<double>(analytic[k]));
      std::vector<double> sorted = mags;
      const auto rank = static_cast<std::size_t>(options.min_gradient_quantile * static_cast<double>(sorted.size() - 1));
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank), sorted.end());
      const double cut = sorted[rank];
      std::erase_if(coords, [&](std::size_t k) { return mags[k] < cut; });
    }
    if (options.max_coords_per_input != 0 && coords.size() > options.max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_input);
      std::sort(coords.begin(), coords.end());
    }
    auto values = in.mutable_data();
    for (std::size_t k : coords) {
      const T original = values[k];
      std::uint64_t plus_pattern = 0, minus_pattern = 0;
      values[k] = static_cast<T>(original + options.step);
      const double plus = evaluate(plus_pattern);
      values[k] = static_cast<T>(original - options.step);
      const double minus = evaluate(minus_pattern);
      values[k] = original;
      if (options.skip_kink_crossings &&
          (plus_pattern != base_pattern || minus_pattern != base_pattern)) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double a = static_cast<double>(analytic[k]);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double err = std::abs(a - numeric) / denom;
      ++result.checked;
      if (err > result.max_rel_error || result.worst.empty()) {
        if (err >= result.max_rel_error) {
          result.max_rel_error = err;
          result.worst = "input#" + std::to_string(i) + "[" + std::to_string(k) + "]";
        }
      }
    }
  }
  return result;
}

template GradCheckResult grad_check<float>(const std::function<Tensor<float>()>&,
                                           std::vector<Tensor<float>>, const GradCheckOptions&);
template GradCheckResult grad_check<double>(const std::function<Tensor<double>()>&,
                                            std::vector<Tensor<double>>, const GradCheckOptions&);

}  // namespace dcl
