#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dcl::train {

// One finite-difference comparison in double precision.
struct GradientCase {
  std::string suite;  // gcl, lcl, dice_ce, consistency, unet
  std::size_t fixture = 0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst;
  bool passed = false;
};

inline constexpr double kGradientTolerance = 1e-6;
// The network suite samples coordinates from the upper quartile of |gradient|
// within each parameter tensor.
inline constexpr double kUNetGradientQuantile = 0.75;

std::vector<std::string> gradient_suite_names();

// Runs `fixtures` random fixtures of every named suite (all suites when
// `suites` is empty). Throws std::invalid_argument on an unknown suite name.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed, std::size_t fixtures = 3,
                                             const std::vector<std::string>& suites = {});

}  // namespace dcl::train
