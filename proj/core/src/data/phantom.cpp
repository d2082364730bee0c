#include "dcl/data/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace dcl::data {

namespace {

struct Ellipse {
  double cy, cx, ay, ax, theta;

  bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double c = std::cos(theta), s = std::sin(theta);
    const double u = c * dy + s * dx;
    const double v = -s * dy + c * dx;
    return (u * u) / (ay * ay) + (v * v) / (ax * ax) <= 1.0;
  }
  double half_extent_y() const {
    return std::sqrt(std::pow(ay * std::cos(theta), 2) + std::pow(ax * std::sin(theta), 2));
  }
  double half_extent_x() const {
    return std::sqrt(std::pow(ay * std::sin(theta), 2) + std::pow(ax * std::cos(theta), 2));
  }
  bool inside_image(double h, double w) const {
    return cy - half_extent_y() >= 0.0 && cy + half_extent_y() <= h - 1.0 &&
           cx - half_extent_x() >= 0.0 && cx + half_extent_x() <= w - 1.0;
  }
};

struct Distractor {
  Ellipse shape;
  double intensity;
  double z_from, z_to;  // active depth range in normalized position
};

}  // namespace

Phantom gen_phantom(const PhantomSpec& spec) {
  if (spec.depth < 4) throw std::invalid_argument("gen_phantom: depth must be >= 4");
  if (spec.height < 8 || spec.width < 8) {
    throw std::invalid_argument("gen_phantom: height and width must be >= 8");
  }
  if (spec.organs < 1 || spec.organs > 32) {
    throw std::invalid_argument("gen_phantom: organ count must be in [1, 32]");
  }
  if (!(spec.noise_sigma >= 0.0)) throw std::invalid_argument("gen_phantom: noise sigma must be >= 0");

  const std::size_t D = spec.depth, H = spec.height, W = spec.width, C = spec.organs;
  const double h = static_cast<double>(H), w = static_cast<double>(W);
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double cy0 = h / 2.0 + uniform(-0.05, 0.05) * h;
  const double cx0 = w / 2.0 + uniform(-0.05, 0.05) * w;
  const double drift_y = uniform(-0.08, 0.08) * h;
  const double drift_x = uniform(-0.08, 0.08) * w;
  const double ay0 = uniform(0.27, 0.32) * h;
  const double ax0 = uniform(0.23, 0.28) * w;
  const double theta = uniform(-0.5, 0.5);
  const double shrink = uniform(0.40, 0.55);

  std::vector<double> means(C);
  for (std::size_t c = 0; c < C; ++c) {
    means[c] = 0.25 + 0.65 * static_cast<double>(c + 1) / static_cast<double>(C) + uniform(-0.02, 0.02);
  }
  const double background = 0.1 + uniform(-0.02, 0.02);

  auto organ_at = [&](double t, std::size_t c) {
    const double s = 1.0 - shrink * t;
    const double f = 1.0 - 0.75 * static_cast<double>(c) / static_cast<double>(C);
    return Ellipse{cy0 + drift_y * (t - 0.5), cx0 + drift_x * (t - 0.5), ay0 * s * f, ax0 * s * f, theta};
  };

  for (double t : {0.0, 1.0}) {
    if (!organ_at(t, 0).inside_image(h, w)) {
      throw std::invalid_argument("gen_phantom: organs do not fit in " + std::to_string(H) + "x" +
                                  std::to_string(W));
    }
  }

  std::vector<Distractor> distractors;
  for (std::size_t k = 0; k < spec.distractors; ++k) {
    const double ay = uniform(0.05, 0.09) * h, ax = uniform(0.05, 0.09) * w;
    const double intensity = means[std::uniform_int_distribution<std::size_t>(0, C - 1)(rng)];
    const double z_from = uniform(0.0, 0.5), z_to = z_from + uniform(0.3, 0.5);
    Ellipse e{0, 0, ay, ax, uniform(-1.0, 1.0)};
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      e.cy = uniform(ay + 1.0, h - ay - 2.0);
      e.cx = uniform(ax + 1.0, w - ax - 2.0);
      // Keep clear of the largest organ cross section.
      const Ellipse outer = organ_at(0.0, 0);
      const Ellipse grown{outer.cy, outer.cx, outer.ay + std::max(ay, ax) + 1.5,
                          outer.ax + std::max(ay, ax) + 1.5, outer.theta};
      const Ellipse late = organ_at(1.0, 0);
      const Ellipse grown_late{late.cy, late.cx, late.ay + std::max(ay, ax) + 1.5,
                               late.ax + std::max(ay, ax) + 1.5, late.theta};
      placed = e.inside_image(h, w) && !grown.contains(e.cy, e.cx) && !grown_late.contains(e.cy, e.cx);
    }
    if (placed) distractors.push_back({e, intensity, z_from, z_to});
  }

  const double fy = uniform(0.3, 0.8), fx = uniform(0.3, 0.8), phase = uniform(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);

  Phantom out;
  out.intensity = Tensor<float>({D, H, W});
  out.labels.assign(D * H * W, 0);
  out.organ_means = means;
  auto img = out.intensity.mutable_data();
  std::vector<std::size_t> slices_with_coverage(C, 0);

  for (std::size_t z = 0; z < D; ++z) {
    const double t = static_cast<double>(z) / static_cast<double>(D - 1);
    std::vector<Ellipse> organs;
    for (std::size_t c = 0; c < C; ++c) organs.push_back(organ_at(t, c));
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const double yy = static_cast<double>(y), xx = static_cast<double>(x);
        std::uint8_t label = 0;
        for (std::size_t c = 0; c < C; ++c) {
          if (organs[c].contains(yy, xx)) label = static_cast<std::uint8_t>(c + 1);
        }
        double value = label ? means[label - 1] : background;
        if (!label) {
          for (const auto& d : distractors) {
            if (t >= d.z_from && t <= d.z_to && d.shape.contains(yy, xx)) value = d.intensity;
          }
        }
        value *= 1.0 + spec.bias_field * std::sin(2.0 * std::numbers::pi * (fy * yy / h + fx * xx / w) + phase);
        if (spec.noise_sigma > 0) value += noise(rng);
        const std::size_t f = (z * H + y) * W + x;
        img[f] = static_cast<float>(std::clamp(value, 0.0, 1.0));
        out.labels[f] = label;
        if (label) ++counts[label - 1];
      }
    for (std::size_t c = 0; c < C; ++c) {
      if (static_cast<double>(counts[c]) >= 0.01 * h * w) ++slices_with_coverage[c];
    }
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (2 * slices_with_coverage[c] < D) {
      throw std::invalid_argument("gen_phantom: organ " + std::to_string(c + 1) +
                                  " covers >= 1% of the slice in only " +
                                  std::to_string(slices_with_coverage[c]) + " of " +
                                  std::to_string(D) + " slices; organs do not fit");
    }
  }
  return out;
}

}  // namespace dcl::data
