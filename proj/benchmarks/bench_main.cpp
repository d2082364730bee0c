#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dcl/losses/contrastive.hpp"
#include "dcl/losses/segmentation.hpp"
#include "dcl/ops.hpp"
#include "dcl/train/optim.hpp"
#include "dcl/train/trainer.hpp"

using namespace dcl;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Tensor<float> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = g(rng);
  return t;
}

std::vector<std::uint8_t> random_labels(std::size_t n, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, classes - 1);
  std::vector<std::uint8_t> out(n);
  for (auto& v : out) v = static_cast<std::uint8_t>(u(rng));
  return out;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto x = random_tensor({4, 16, side, side}, 1);
  const auto k = random_tensor({32, 16, 3, 3}, 2);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k, 1, 1));
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_Conv2dBackward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  auto x = random_tensor({4, 16, side, side}, 1);
  auto k = random_tensor({32, 16, 3, 3}, 2);
  x.set_requires_grad(true);
  k.set_requires_grad(true);
  for (auto _ : state) {
    backward(sum_all(conv2d(x, k, 1, 1)));
    x.zero_grad();
    k.zero_grad();
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

static void BM_DiceCe(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  auto logits = random_tensor({4, 4, side, side}, 3);
  logits.set_requires_grad(true);
  const auto labels = random_labels(4 * side * side, 4, 4);
  for (auto _ : state) {
    backward(losses::dice_ce_loss(logits, labels).total);
    logits.zero_grad();
  }
}
BENCHMARK(BM_DiceCe)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_GclLoss(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  std::vector<double> positions;
  for (std::size_t b = 0; b < batch; ++b) positions.insert(positions.end(), 2, static_cast<double>(b % 16) / 15.0);
  const auto s = data::similarity_matrix(positions);
  auto raw = random_tensor({2 * batch, 64}, 5);
  raw.set_requires_grad(true);
  for (auto _ : state) {
    backward(losses::gcl_loss(l2_normalize(raw, 1), s, 0.65, 0.1));
    raw.zero_grad();
  }
}
BENCHMARK(BM_GclLoss)->Arg(8)->Arg(32)->Unit(benchmark::kMicrosecond);

// One supervised UNet step: forward, Dice + CE, backward and Adam.
static void BM_SegmentationStep(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  train::TrainConfig config;
  config.height = config.width = side;
  auto params = train::initial_stage2_pair<float>(config, nullptr).student;
  train::Adam<float> adam(config.stage2_lr);
  const auto x = random_tensor({4, 1, side, side}, 6);
  const auto labels = random_labels(4 * side * side, 4, 7);
  for (auto _ : state) {
    const auto logits = nets::decoder_forward(params, nets::encoder_forward(params, x)).logits;
    backward(losses::dice_ce_loss(logits, labels).total);
    adam.step(params);
    params.zero_grad();
  }
}
BENCHMARK(BM_SegmentationStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
