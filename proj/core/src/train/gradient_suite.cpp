#include "dcl/train/gradient_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <stdexcept>

#include "dcl/data/slices.hpp"
#include "dcl/grad_check.hpp"
#include "dcl/losses/contrastive.hpp"
#include "dcl/losses/segmentation.hpp"
#include "dcl/nets/unet.hpp"
#include "dcl/ops.hpp"

namespace dcl::train {

namespace {

using Rng = std::mt19937_64;

Tensor<double> uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = u(rng);
  return t;
}

std::vector<std::uint8_t> class_mask(std::size_t n, std::size_t classes, Rng& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(classes) - 1);
  std::vector<std::uint8_t> m(n);
  for (auto& v : m) v = static_cast<std::uint8_t>(u(rng));
  return m;
}

GradientCase finish(const std::string& suite, std::size_t fixture, const GradCheckResult& r) {
  GradientCase c;
  c.suite = suite;
  c.fixture = fixture;
  c.max_rel_error = r.max_rel_error;
  c.checked = r.checked;
  c.skipped_kinks = r.skipped_kinks;
  c.worst = r.worst;
  c.passed = r.checked > 0 && r.max_rel_error <= kGradientTolerance;
  return c;
}

GradientCase gcl_case(std::size_t fixture, Rng& rng) {
  const std::size_t B = 4, d = 8;
  auto raw = uniform({2 * B, d}, rng);
  std::uniform_int_distribution<int> k(0, 15);
  std::vector<double> positions;
  for (std::size_t b = 0; b < B; ++b) {
    const double p = k(rng) / 15.0;
    positions.insert(positions.end(), {p, p});
  }
  const auto s = data::similarity_matrix(positions);
  const std::function<Tensor<double>()> f = [&] {
    return losses::gcl_loss(l2_normalize(raw, 1), s, losses::kDefaultSimilarityThreshold, losses::kDefaultTemperature);
  };
  return finish("gcl", fixture, grad_check<double>(f, {raw}));
}

GradientCase lcl_case(std::size_t fixture, Rng& rng) {
  const std::size_t C = 3, K = 8, H = 6, W = 6;
  losses::MemoryBank bank(C, K, 8);
  std::normal_distribution<double> g;
  for (std::size_t c = 1; c <= C; ++c) {
    for (int i = 0; i < 4; ++i) {
      losses::MemoryBank::Vector v(K);
      for (auto& x : v) x = g(rng);
      bank.push(c, v);
    }
  }
  auto proj = uniform({1, K, H, W}, rng);
  const auto mask = class_mask(H * W, C + 1, rng);
  const std::function<Tensor<double>()> f = [&] {
    return losses::lcl_loss(losses::mask_centers(proj, mask, C)[0], bank, losses::kDefaultTemperature);
  };
  return finish("lcl", fixture, grad_check<double>(f, {proj}));
}

GradientCase dice_ce_case(std::size_t fixture, Rng& rng) {
  auto logits = uniform({1, 4, 8, 8}, rng, -2, 2);
  const auto labels = class_mask(64, 4, rng);
  const std::function<Tensor<double>()> f = [&] { return losses::dice_ce_loss(logits, labels).total; };
  return finish("dice_ce", fixture, grad_check<double>(f, {logits}));
}

GradientCase consistency_case(std::size_t fixture, Rng& rng) {
  auto logits = uniform({2, 4, 4, 4}, rng, -2, 2);
  Tensor<double> target;
  {
    NoGradGuard no_grad;
    target = softmax_channels(uniform({2, 4, 4, 4}, rng, -2, 2));
  }
  const std::function<Tensor<double>()> f = [&] {
    return losses::consistency_loss(softmax_channels(logits), target);
  };
  return finish("consistency", fixture, grad_check<double>(f, {logits}));
}

// Every parameter of the encoder, projection head, decoder, projection layer
// and output head, on a two-image batch. Coordinates are sampled per tensor.
constexpr std::size_t kSide = 8;

GradientCase unet_case(std::size_t fixture, Rng& rng) {
  const nets::UNetConfig cfg;
  const std::uint64_t init_seed = rng();
  auto p = nets::init_encoder<double>(cfg, init_seed);
  for (auto& [name, t] : nets::init_head<double>(cfg, init_seed)) p.add(name, t);
  for (auto& [name, t] : nets::init_segmentation_tail<double>(cfg, init_seed)) p.add(name, t);
  const auto x = uniform({2, 1, kSide, kSide}, rng, 0, 1);
  const auto w_seg = uniform({2, cfg.num_classes, kSide, kSide}, rng);
  const auto w_emb = uniform({2, cfg.embed_dim}, rng);
  const auto w_proj = uniform({2, cfg.proj_dim, kSide, kSide}, rng);
  std::vector<Tensor<double>> inputs;
  for (auto& [name, t] : p) inputs.push_back(t);
  const std::function<Tensor<double>()> f = [&] {
    const auto enc = nets::encoder_forward(p, x);
    const auto dec = nets::decoder_forward(p, enc);
    auto loss = sum_all(mul(dec.logits, w_seg));
    loss = add(loss, sum_all(mul(nets::projection_head_forward(p, enc.bottleneck), w_emb)));
    return add(loss, sum_all(mul(nets::projection_layer_forward(p, dec.features), w_proj)));
  };
  GradCheckOptions options;
  options.max_coords_per_input = 6;
  options.seed = rng();
  // Central differences at this step carry ~1e-10 absolute round-off through
  // the decoder, so entries with the smallest gradients cannot resolve 1e-6.
  options.min_gradient_quantile = kUNetGradientQuantile;
  return finish("unet", fixture, grad_check<double>(f, inputs, options));
}

using CaseFn = GradientCase (*)(std::size_t, Rng&);

const std::vector<std::pair<std::string, CaseFn>>& registry() {
  static const std::vector<std::pair<std::string, CaseFn>> r = {
      {"gcl", gcl_case},
      {"lcl", lcl_case},
      {"dice_ce", dice_ce_case},
      {"consistency", consistency_case},
      {"unet", unet_case},
  };
  return r;
}

}  // namespace

std::vector<std::string> gradient_suite_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : registry()) names.push_back(name);
  return names;
}

std::vector<GradientCase> run_gradient_suite(std::uint64_t seed, std::size_t fixtures,
                                             const std::vector<std::string>& suites) {
  for (const auto& s : suites) {
    const auto& r = registry();
    if (std::none_of(r.begin(), r.end(), [&](const auto& e) { return e.first == s; })) {
      throw std::invalid_argument("unknown gradient suite '" + s + "'");
    }
  }
  std::vector<GradientCase> out;
  for (std::size_t i = 0; i < registry().size(); ++i) {
    const auto& [name, fn] = registry()[i];
    if (!suites.empty() && std::find(suites.begin(), suites.end(), name) == suites.end()) continue;
    Rng rng(seed * 1000003 + i);
    for (std::size_t k = 0; k < fixtures; ++k) out.push_back(fn(k, rng));
  }
  return out;
}

}  // namespace dcl::train
