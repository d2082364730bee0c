#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dcl/grad_check.hpp"
#include "dcl/ops.hpp"
#include "dcl/tensor.hpp"

namespace dcl {
namespace {

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (double& v : t.mutable_data()) v = dist(rng);
  return t;
}

// Values bounded away from the relu kink.
Tensor<double> away_from_zero(Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.05, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor<double> t(std::move(shape));
  for (double& v : t.mutable_data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

TEST(TensorTest, ElementCountMatchesShape) {
  Tensor<float> t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(Tensor<float>::scalar(3.f).numel(), 1u);
  EXPECT_EQ(Tensor<float>({0, 4}).numel(), 0u);
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), std::invalid_argument);
}

TEST(TensorTest, GradHasSameShapeWhenRequested) {
  Tensor<double> t({3, 2});
  EXPECT_THROW(t.grad(), std::logic_error);
  t.set_requires_grad(true);
  EXPECT_EQ(t.grad().size(), t.numel());
}

TEST(TensorTest, SumGradientIsOnes) {
  Tensor<double> x({2, 3, 4}, 0.5);
  x.set_requires_grad(true);
  backward(sum_all(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(TensorTest, ZeroScaledLossGivesZeroGrad) {
  Tensor<double> x({5}, 2.0);
  x.set_requires_grad(true);
  backward(sum_all(scale(x, 0.0)));
  for (double g : x.grad()) EXPECT_EQ(g, 0.0);
}

TEST(TensorTest, BackwardTwiceDoublesLeafGrads) {
  std::mt19937_64 rng(3);
  auto x = random_tensor({4, 3}, rng);
  auto w = random_tensor({3, 2}, rng);
  x.set_requires_grad(true);
  w.set_requires_grad(true);
  auto loss = sum_all(exp(matmul(x, w)));
  backward(loss);
  const std::vector<double> once(w.grad().begin(), w.grad().end());
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(w.grad()[i], 2.0 * once[i]);
}

TEST(TensorTest, TensorOffLossPathHasZeroGrad) {
  Tensor<double> x({3}, 1.0), unused({3}, 2.0);
  x.set_requires_grad(true);
  unused.set_requires_grad(true);
  auto side = mul(unused, unused);  // recorded but not part of the loss
  backward(sum_all(x));
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
  EXPECT_TRUE(side.requires_grad());
}

TEST(TensorTest, NonScalarLossRejected) {
  Tensor<double> x({3}, 1.0);
  x.set_requires_grad(true);
  EXPECT_THROW(backward(scale(x, 2.0)), std::invalid_argument);
}

TEST(TensorTest, TapeVisitsEachOpOnceInReverseOrder) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  auto a = exp(x);
  auto b = mul(a, a);      // a used twice
  auto c = add(b, a);
  auto loss = sum_all(c);
  auto tape = Tape<double>::collect(loss);
  ASSERT_EQ(tape.size(), 4u);
  std::vector<std::string> order;
  for (const char* op : tape.replay_backward()) order.emplace_back(op);
  EXPECT_EQ(order, (std::vector<std::string>{"sum_all", "add", "mul", "exp"}));
}

TEST(TensorTest, NoGradGuardSkipsRecording) {
  Tensor<double> x({2}, 1.0);
  x.set_requires_grad(true);
  NoGradGuard guard;
  auto y = exp(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

TEST(Conv2dTest, IdentityKernelReproducesInput) {
  Tensor<double> in({1, 1, 3, 3}, 1.0);
  Tensor<double> k({1, 1, 1, 1}, 1.0);
  auto out = conv2d(in, k, 1, 0);
  ASSERT_EQ(out.shape(), in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) EXPECT_EQ(out.at(i), in.at(i));
}

TEST(Conv2dTest, ZeroKernelGivesZeroOutput) {
  std::mt19937_64 rng(1);
  auto in = random_tensor({2, 3, 6, 6}, rng);
  Tensor<double> k({4, 3, 3, 3}, 0.0);
  auto out = conv2d(in, k, 1, 1);
  EXPECT_EQ(out.shape(), (Shape{2, 4, 6, 6}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2dTest, OutputGeometryAndStride) {
  Tensor<float> in({1, 2, 7, 7}), k({3, 2, 3, 3});
  EXPECT_EQ(conv2d(in, k, 2, 1).shape(), (Shape{1, 3, 4, 4}));
  EXPECT_EQ(conv2d(in, k, 1, 0).shape(), (Shape{1, 3, 5, 5}));
}

TEST(Conv2dTest, ShapeErrorsNameDimensions) {
  Tensor<float> in({1, 2, 5, 5}), k({3, 4, 3, 3});
  try {
    conv2d(in, k, 1, 1);
    FAIL() << "expected rejection";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("input channels 2"), std::string::npos) << e.what();
  }
  Tensor<float> k2({1, 2, 3, 3});
  Tensor<float> even({1, 2, 6, 6});
  EXPECT_NO_THROW(conv2d(in, k2, 2, 0));
  EXPECT_THROW(conv2d(even, k2, 2, 0), std::invalid_argument);  // (6 - 3) % 2 != 0
  Tensor<float> big({1, 2, 5, 5, 1});
  EXPECT_THROW(conv2d(big, k2, 1, 0), std::invalid_argument);
}

TEST(Conv2dTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    std::mt19937_64 rng(seed);
    auto in = random_tensor({1, 2, 5, 5}, rng);
    auto k = random_tensor({3, 2, 3, 3}, rng);
    auto r = grad_check<double>([&] { return sum_all(conv2d(in, k, 1, 1)); }, {in, k});
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
    auto strided = grad_check<double>(
        [&] {
          auto o = conv2d(in, k, 2, 0);
          return sum_all(mul(o, o));
        },
        {in, k});
    EXPECT_LE(strided.max_rel_error, 1e-6) << strided.worst;
  }
}

TEST(SoftmaxTest, EqualLogitsGiveUniform) {
  Tensor<double> logits({1, 4, 2, 2}, 0.7);
  auto p = softmax_channels(logits);
  for (double v : p.data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(SoftmaxTest, SaturatesWithoutOverflow) {
  Tensor<double> logits({1, 2, 1, 1}, std::vector<double>{0.0, 1e4});
  auto p = softmax_channels(logits);
  EXPECT_EQ(p.at(0), 0.0);
  EXPECT_EQ(p.at(1), 1.0);
  Tensor<float> lf({1, 2, 1, 1}, std::vector<float>{0.f, 1e4f});
  auto pf = softmax_channels(lf);
  EXPECT_TRUE(std::isfinite(pf.at(0)) && std::isfinite(pf.at(1)));
}

TEST(SoftmaxTest, RejectsNonFinite) {
  Tensor<double> logits({1, 2, 1, 1}, std::vector<double>{0.0, NAN});
  EXPECT_THROW(softmax_channels(logits), std::domain_error);
}

TEST(SoftmaxTest, SumsToOnePerPixel) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto logits = random_tensor({2, 5, 3, 3}, rng, -30.0, 30.0);
    auto p = softmax_channels(logits);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t px = 0; px < 9; ++px) {
        double total = 0;
        for (std::size_t c = 0; c < 5; ++c) {
          const double v = p.at((n * 5 + c) * 9 + px);
          EXPECT_GE(v, 0.0);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
      }
  }
}

TEST(SoftmaxTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {21u, 22u, 23u}) {
    std::mt19937_64 rng(seed);
    auto logits = random_tensor({2, 3, 2, 2}, rng, -2.0, 2.0);
    auto weights = random_tensor({2, 3, 2, 2}, rng);
    auto r = grad_check<double>([&] { return sum_all(mul(softmax_channels(logits), weights)); },
                                {logits});
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
    auto lr = grad_check<double>(
        [&] { return sum_all(mul(log_softmax_channels(logits), weights)); }, {logits});
    EXPECT_LE(lr.max_rel_error, 1e-6) << lr.worst;
  }
}

TEST(L2NormalizeTest, KnownValues) {
  Tensor<double> v({2}, std::vector<double>{3.0, 4.0});
  auto u = l2_normalize(v, 0);
  EXPECT_NEAR(u.at(0), 0.6, 1e-15);
  EXPECT_NEAR(u.at(1), 0.8, 1e-15);
  auto again = l2_normalize(u, 0);
  EXPECT_NEAR(again.at(0), 0.6, 1e-15);
  EXPECT_NEAR(again.at(1), 0.8, 1e-15);
}

TEST(L2NormalizeTest, RejectsDegenerate) {
  Tensor<double> v({3}, 0.0);
  EXPECT_THROW(l2_normalize(v, 0), std::domain_error);
  Tensor<double> tiny({2}, std::vector<double>{1e-9, 0.0});
  EXPECT_THROW(l2_normalize(tiny, 0), std::domain_error);
}

TEST(L2NormalizeTest, UnitNormAlongAxisAndGradient) {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    std::mt19937_64 rng(seed);
    auto v = random_tensor({8}, rng);
    auto w = random_tensor({8}, rng);
    auto r = grad_check<double>([&] { return sum_all(mul(l2_normalize(v, 0), w)); }, {v});
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;

    auto m = random_tensor({3, 5}, rng);
    auto rows = l2_normalize(m, 1);
    for (std::size_t i = 0; i < 3; ++i) {
      double sq = 0;
      for (std::size_t j = 0; j < 5; ++j) sq += rows.at(i * 5 + j) * rows.at(i * 5 + j);
      EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-6);
    }
  }
}

TEST(GradCheckTest, Polynomial) {
  Tensor<double> x({1}, 3.0);
  GradCheckOptions opts;
  auto r = grad_check<double>([&] { return sum_all(mul(x, x)); }, {x}, opts);
  EXPECT_LE(r.max_rel_error, 1e-9);
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(GradCheckTest, ConstantFunction) {
  Tensor<double> x({3}, 1.5);
  auto r = grad_check<double>([&] { return sum_all(scale(x, 0.0)); }, {x});
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheckTest, NonScalarRejected) {
  Tensor<double> x({3}, 1.5);
  EXPECT_THROW(grad_check<double>([&] { return exp(x); }, {x}), std::invalid_argument);
}

TEST(GradCheckTest, CompositeNetworkGradient) {
  // conv -> bias -> relu -> 1x1 conv -> softmax -> cross-entropy against a fixed target
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    std::mt19937_64 rng(seed);
    auto in = away_from_zero({2, 1, 4, 4}, rng);
    auto k1 = random_tensor({3, 1, 3, 3}, rng);
    auto b1 = random_tensor({3}, rng);
    auto k2 = random_tensor({2, 3, 1, 1}, rng);
    Tensor<double> target({2, 2, 4, 4}, 0.0);
    for (std::size_t i = 0; i < 16; ++i) target.mutable_data()[i] = 1.0;          // image 0 class 0
    for (std::size_t i = 48; i < 64; ++i) target.mutable_data()[i] = 1.0;         // image 1 class 1
    auto f = [&] {
      auto h = relu(add_bias(conv2d(in, k1, 1, 1), b1));
      auto logp = log_softmax_channels(conv2d(h, k2, 1, 0));
      return scale(sum_all(mul(logp, target)), -1.0 / 32.0);
    };
    auto r = grad_check<double>(f, {in, k1, b1, k2});
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(OpsTest, PoolUpsampleConcatGradients) {
  std::mt19937_64 rng(7);
  auto a = random_tensor({2, 2, 4, 4}, rng);
  auto b = random_tensor({2, 3, 4, 4}, rng);
  auto w = random_tensor({2, 5, 4, 4}, rng);
  auto f = [&] {
    auto pooled = upsample_nearest2x(max_pool2x2(a));
    return sum_all(mul(concat_channels(pooled, b), w));
  };
  auto r = grad_check<double>(f, {a, b});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(OpsTest, ReductionsAndSelectGradients) {
  std::mt19937_64 rng(8);
  auto x = random_tensor({2, 3, 4}, rng, 0.5, 2.0);
  auto w3 = random_tensor({3}, rng);
  auto f = [&] {
    auto s = sum(x, {0, 2});
    auto m = mean(x, {1});
    auto picked = index_select(x, {0, 5, 5, 23}, {2, 2});
    auto masked = masked_select(x, std::vector<std::uint8_t>(24, 1));
    return add(add(sum_all(mul(s, w3)), sum_all(log(m))),
               add(sum_all(exp(picked)), mean_all(div(masked, add_scalar(masked, 1.0)))));
  };
  auto r = grad_check<double>(f, {x});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(OpsTest, SumOverAxesValues) {
  Tensor<double> x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  auto s0 = sum(x, {0});
  EXPECT_EQ(s0.shape(), (Shape{3}));
  EXPECT_EQ(s0.at(0), 5);
  EXPECT_EQ(s0.at(2), 9);
  auto s1 = mean(x, {1});
  EXPECT_EQ(s1.at(1), 5);
  EXPECT_EQ(sum(x, {0, 1}).rank(), 0u);
}

TEST(OpsTest, LogSoftmaxRowsMaskedGradient) {
  std::mt19937_64 rng(9);
  auto x = random_tensor({4, 4}, rng, -3, 3);
  auto w = random_tensor({4, 4}, rng);
  std::vector<std::uint8_t> keep(16, 1);
  for (int i = 0; i < 4; ++i) keep[i * 5] = 0;
  auto out = log_softmax_rows(x, keep);
  EXPECT_EQ(out.at(0), 0.0);
  auto r = grad_check<double>([&] { return sum_all(mul(log_softmax_rows(x, keep), w)); }, {x});
  EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
}

TEST(OpsTest, ReluSubgradientAtZeroIsZero) {
  Tensor<double> x({3}, std::vector<double>{-1.0, 0.0, 2.0});
  x.set_requires_grad(true);
  backward(sum_all(relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(OpsTest, DeterministicAcrossRuns) {
  std::mt19937_64 rng(10);
  auto in = random_tensor({2, 3, 8, 8}, rng);
  auto k = random_tensor({4, 3, 3, 3}, rng);
  auto a = conv2d(in, k, 1, 1);
  auto b = conv2d(in, k, 1, 1);
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.at(i), b.at(i));
}

}  // namespace
}  // namespace dcl
