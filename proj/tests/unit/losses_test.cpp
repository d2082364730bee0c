#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "dcl/grad_check.hpp"
#include "dcl/losses/contrastive.hpp"
#include "dcl/losses/objective.hpp"
#include "dcl/losses/segmentation.hpp"
#include "dcl/ops.hpp"
#include "scalar_oracles.hpp"

using namespace dcl;
using namespace dcl::losses;

namespace {

std::vector<double> values(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) v = u(rng);
  return t;
}

Tensor<double> unit_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  NoGradGuard guard;
  return l2_normalize(random_tensor({n, d}, rng), 1);
}

std::vector<std::uint8_t> random_mask(std::size_t n, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, static_cast<int>(classes) - 1);
  std::vector<std::uint8_t> m(n);
  for (auto& v : m) v = static_cast<std::uint8_t>(u(rng));
  return m;
}

// Paired views of B slices: positions duplicated as (p_0, p_0, p_1, p_1, ...).
std::vector<double> view_positions(std::size_t B, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k(0, 15);
  std::vector<double> p;
  for (std::size_t b = 0; b < B; ++b) {
    const double v = k(rng) / 15.0;
    p.push_back(v);
    p.push_back(v);
  }
  return p;
}

MemoryBank random_bank(std::size_t classes, std::size_t K, std::size_t per_class, std::size_t Q,
                       std::mt19937_64& rng) {
  MemoryBank bank(classes, K, Q);
  std::normal_distribution<double> g;
  for (std::size_t c = 1; c <= classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      MemoryBank::Vector v(K);
      for (auto& x : v) x = g(rng);
      bank.push(c, v);
    }
  }
  return bank;
}

std::vector<std::vector<std::vector<double>>> bank_lists(const MemoryBank& bank) {
  std::vector<std::vector<std::vector<double>>> out;
  for (std::size_t c = 1; c <= bank.num_foreground(); ++c)
    out.emplace_back(bank.buffer(c).begin(), bank.buffer(c).end());
  return out;
}

GradCheckOptions exhaustive() { return {}; }

}  // namespace

TEST(GclLoss, SinglePairIsExactlyZero) {
  std::mt19937_64 rng(1);
  const auto z = unit_rows(2, 8, rng);
  EXPECT_EQ(gcl_loss(z, data::similarity_matrix({0.3, 0.3}), 0.65, 0.1).item(), 0.0);
}

TEST(GclLoss, NoPositivesGivesZeroOrRejection) {
  std::mt19937_64 rng(2);
  const auto z = unit_rows(4, 8, rng);
  const auto s = data::similarity_matrix({0.0, 0.5, 1.0, 0.2});  // off-diagonal s <= 0.8
  EXPECT_THROW(gcl_loss(z, s, 0.85, 0.1), std::invalid_argument);
  const auto l = gcl_loss(z, s, 0.85, 0.1, /*allow_empty=*/true);
  EXPECT_EQ(l.item(), 0.0);
  EXPECT_FALSE(std::signbit(l.item()));
  EXPECT_THROW(gcl_loss(z, data::similarity_matrix({0.1, 0.1, 0.1, 0.1}), 0.65, 0.0), std::invalid_argument);
  EXPECT_THROW(gcl_loss(z, data::similarity_matrix({0.1, 0.1}), 0.65, 0.1), std::invalid_argument);
}

TEST(GclLoss, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(3);
  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t B = 1 + fixture % 4, n = 2 * B, d = 8;
    const auto z = unit_rows(n, d, rng);
    const auto pos = view_positions(B, rng);
    const auto s = data::similarity_matrix(pos);
    const double got = gcl_loss(z, s, 0.65, 0.1).item();
    EXPECT_NEAR(got, oracle::gcl(values(z), n, d, s.values(), 0.65, 0.1), 1e-6) << fixture;
    EXPECT_GE(got, 0.0);
  }
}

TEST(GclLoss, PermutationInvariant) {
  std::mt19937_64 rng(4);
  const std::size_t n = 8, d = 6;
  const auto z = unit_rows(n, d, rng);
  const auto pos = view_positions(4, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> zp(n * d), pp(n);
  for (std::size_t i = 0; i < n; ++i) {
    pp[i] = pos[perm[i]];
    for (std::size_t k = 0; k < d; ++k) zp[i * d + k] = z.data()[perm[i] * d + k];
  }
  EXPECT_NEAR(gcl_loss(z, data::similarity_matrix(pos), 0.65, 0.1).item(),
              gcl_loss(Tensor<double>({n, d}, zp), data::similarity_matrix(pp), 0.65, 0.1).item(), 1e-12);
}

TEST(GclLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int fixture = 0; fixture < 3; ++fixture) {
    auto raw = random_tensor({8, 8}, rng);
    const auto s = data::similarity_matrix(view_positions(4, rng));
    auto f = [&] { return gcl_loss(l2_normalize(raw, 1), s, 0.65, 0.1); };
    const auto r = grad_check<double>(f, {raw}, exhaustive());
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
    EXPECT_EQ(r.checked, 64u);
  }
}

TEST(MaskCenters, ConstantFieldAndTwoPointMean) {
  const std::size_t K = 3, H = 2, W = 2;
  Tensor<double> field({1, K, H, W});
  auto f = field.mutable_data();
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t p = 0; p < H * W; ++p) f[k * H * W + p] = 0.5 + static_cast<double>(k);
  const auto constant = mask_centers(field, std::vector<std::uint8_t>(4, 1), 3);
  ASSERT_EQ(constant.size(), 1u);
  ASSERT_TRUE(constant[0].present(1));
  EXPECT_FALSE(constant[0].present(2));
  EXPECT_FALSE(constant[0].present(3));
  EXPECT_EQ(constant[0].counts, (std::vector<std::size_t>{4, 0, 0}));
  for (std::size_t k = 0; k < K; ++k) EXPECT_EQ(constant[0].center(1).data()[k], 0.5 + k);

  Tensor<double> two({1, 2, 1, 2}, std::vector<double>{1.0, 3.0, -2.0, 4.0});
  const auto m = mask_centers(two, {1, 1}, 1);
  EXPECT_EQ(m[0].center(1).data()[0], 2.0);
  EXPECT_EQ(m[0].center(1).data()[1], 1.0);

  EXPECT_THROW(mask_centers(two, {1, 2}, 1), std::invalid_argument);
  EXPECT_THROW(mask_centers(two, {1}, 1), std::invalid_argument);
}

TEST(MaskCenters, MatchesPerPixelLoopAndIgnoresPixelOrder) {
  std::mt19937_64 rng(6);
  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t N = 1 + fixture % 2, K = 8, H = 4 + 4 * (fixture % 4), W = H, C = 1 + fixture % 3;
    const auto proj = random_tensor({N, K, H, W}, rng);
    const auto mask = random_mask(N * H * W, C + 1, rng);
    const auto got = mask_centers(proj, mask, C);
    const auto want = oracle::mask_centers(values(proj), N, K, H, W, mask, C);
    for (std::size_t n = 0; n < N; ++n) {
      for (std::size_t c = 1; c <= C; ++c) {
        ASSERT_EQ(got[n].present(c), want[n][c - 1].has_value());
        if (!got[n].present(c)) continue;
        for (std::size_t k = 0; k < K; ++k) EXPECT_NEAR(got[n].center(c).data()[k], (*want[n][c - 1])[k], 1e-12);
      }
    }
  }

  // Permuting pixel positions of features and mask together leaves centers fixed.
  const std::size_t K = 4, H = 4, W = 4;
  const auto proj = random_tensor({1, K, H, W}, rng);
  const auto mask = random_mask(H * W, 3, rng);
  std::vector<std::size_t> perm(H * W);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pf(K * H * W);
  std::vector<std::uint8_t> pm(H * W);
  for (std::size_t p = 0; p < H * W; ++p) {
    pm[p] = mask[perm[p]];
    for (std::size_t k = 0; k < K; ++k) pf[k * H * W + p] = proj.data()[k * H * W + perm[p]];
  }
  const auto a = mask_centers(proj, mask, 2);
  const auto b = mask_centers(Tensor<double>({1, K, H, W}, pf), pm, 2);
  for (std::size_t c = 1; c <= 2; ++c) {
    ASSERT_EQ(a[0].present(c), b[0].present(c));
    if (!a[0].present(c)) continue;
    for (std::size_t k = 0; k < K; ++k) EXPECT_NEAR(a[0].center(c).data()[k], b[0].center(c).data()[k], 1e-12);
  }
}

TEST(MemoryBank, PresenceSemanticsAndFifo) {
  MemoryBank bank(3, 2, 2);
  MaskCenterSet<double> set;
  set.centers = {Tensor<double>({2}, std::vector<double>{1, 0}), std::nullopt,
                 Tensor<double>({2}, std::vector<double>{0, 1})};
  set.counts = {5, 0, 7};
  bank_push(bank, set);
  EXPECT_EQ(bank.size(1), 1u);
  EXPECT_EQ(bank.size(2), 0u);
  EXPECT_EQ(bank.size(3), 1u);

  MemoryBank fifo(1, 1, 2);
  for (double v : {1.0, 2.0, 3.0}) fifo.push(1, {v});
  ASSERT_EQ(fifo.size(1), 2u);
  EXPECT_EQ(fifo.buffer(1)[0][0], 2.0);
  EXPECT_EQ(fifo.buffer(1)[1][0], 3.0);

  EXPECT_THROW(bank.push(1, {1.0, 2.0, 3.0}), std::invalid_argument);
  EXPECT_THROW(bank.push(4, {1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(MemoryBank(3, 2, 0), std::invalid_argument);
}

TEST(MemoryBank, RandomPushSequencesMatchListOracle) {
  std::mt19937_64 rng(7);
  for (std::size_t Q : {2u, 5u, 64u, 256u}) {
    MemoryBank bank(3, 4, Q);
    oracle::ListBank ref(3, Q);
    std::bernoulli_distribution present(0.6);
    std::normal_distribution<double> g;
    for (std::size_t step = 0; step < Q + 50; ++step) {
      MaskCenterSet<double> set;
      set.counts.assign(3, 0);
      set.centers.resize(3);
      for (std::size_t c = 1; c <= 3; ++c) {
        if (!present(rng)) continue;
        std::vector<double> v(4);
        for (auto& x : v) x = g(rng);
        set.centers[c - 1] = Tensor<double>({4}, v);
        set.counts[c - 1] = 1;
        ref.push(c, v);
      }
      bank_push(bank, set);
      for (std::size_t c = 1; c <= 3; ++c) ASSERT_LE(bank.size(c), Q);
    }
    for (std::size_t c = 1; c <= 3; ++c) {
      const auto& buf = bank.buffer(c);
      ASSERT_EQ(buf.size(), ref.lists[c - 1].size());
      for (std::size_t i = 0; i < buf.size(); ++i) EXPECT_EQ(buf[i], ref.lists[c - 1][i]);
    }
  }
}

TEST(LclLoss, HandFixture) {
  MemoryBank bank(2, 2, 4);
  bank.push(1, {1.0, 0.0});
  bank.push(2, {0.0, 1.0});
  MaskCenterSet<double> set;
  set.centers = {Tensor<double>({2}, std::vector<double>{1.0, 0.0}), std::nullopt};
  set.counts = {1, 0};
  EXPECT_NEAR(lcl_loss(set, bank, 1.0).item(), std::log(1.0 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(lcl_loss(set, bank, 1.0).item(), 0.31326, 1e-5);

  MemoryBank empty(2, 2, 4);
  EXPECT_EQ(lcl_loss(set, empty, 0.1).item(), 0.0);
  EXPECT_THROW(lcl_loss(set, bank, 0.0), std::invalid_argument);
}

TEST(LclLoss, MatchesLoopOracle) {
  std::mt19937_64 rng(8);
  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t C = 1 + fixture % 3, K = 8;
    const auto bank = random_bank(C, K, 1 + fixture % 4, 8, rng);
    const auto proj = random_tensor({1, K, 8, 8}, rng);
    const auto mask = random_mask(64, C + 1, rng);
    const auto centers = mask_centers(proj, mask, C)[0];
    std::vector<std::optional<std::vector<double>>> oc;
    for (std::size_t c = 1; c <= C; ++c) {
      if (centers.present(c)) oc.emplace_back(values(centers.center(c)));
      else oc.emplace_back();
    }
    EXPECT_NEAR(lcl_loss(centers, bank, 0.1).item(), oracle::lcl(oc, bank_lists(bank), 0.1), 1e-6) << fixture;
  }
}

TEST(LclLoss, DecreasesWhenCenterRotatesTowardPositives) {
  MemoryBank bank(2, 2, 4);
  bank.push(1, {1.0, 0.0});
  bank.push(2, {0.0, 1.0});
  double previous = INFINITY;
  for (double angle = 1.5; angle >= 0.0; angle -= 0.25) {
    MaskCenterSet<double> set;
    set.centers = {Tensor<double>({2}, std::vector<double>{std::cos(angle), std::sin(angle)}), std::nullopt};
    set.counts = {1, 0};
    const double l = lcl_loss(set, bank, 0.1).item();
    EXPECT_LT(l, previous);
    previous = l;
  }
}

TEST(LclLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int fixture = 0; fixture < 3; ++fixture) {
    const auto bank = random_bank(3, 8, 4, 8, rng);
    auto proj = random_tensor({1, 8, 6, 6}, rng);
    const auto mask = random_mask(36, 4, rng);
    auto f = [&] { return lcl_loss(mask_centers(proj, mask, 3)[0], bank, 0.1); };
    const auto r = grad_check<double>(f, {proj}, exhaustive());
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
  }
}

TEST(DiceCe, PerfectAndUniformLimits) {
  const std::size_t C = 4, H = 4, W = 4;
  std::mt19937_64 rng(10);
  const auto labels = random_mask(H * W, C, rng);
  Tensor<double> peaked({1, C, H, W});
  for (std::size_t p = 0; p < H * W; ++p) peaked.mutable_data()[labels[p] * H * W + p] = 20.0;
  // Every class must appear for the Dice term to vanish.
  std::vector<std::uint8_t> all_classes = labels;
  for (std::size_t c = 0; c < C; ++c) all_classes[c] = static_cast<std::uint8_t>(c);
  Tensor<double> peaked_all({1, C, H, W});
  for (std::size_t p = 0; p < H * W; ++p) peaked_all.mutable_data()[all_classes[p] * H * W + p] = 20.0;
  EXPECT_LE(dice_ce_loss(peaked_all, all_classes).total.item(), 1e-6);

  const auto uniform = dice_ce_loss(Tensor<double>({2, C, H, W}, 0.3), random_mask(2 * H * W, C, rng));
  EXPECT_NEAR(uniform.ce.item(), std::log(4.0), 1e-12);

  EXPECT_THROW(dice_ce_loss(peaked, std::vector<std::uint8_t>(H * W, 4)), std::invalid_argument);
  EXPECT_THROW(dice_ce_loss(peaked, std::vector<std::uint8_t>(3, 0)), std::invalid_argument);
}

TEST(DiceCe, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t N = 1 + fixture % 4, C = 2 + fixture % 3, H = 4 * (1 + fixture % 4), W = H;
    const auto logits = random_tensor({N, C, H, W}, rng, -3, 3);
    const auto labels = random_mask(N * H * W, C, rng);
    EXPECT_NEAR(dice_ce_loss(logits, labels).total.item(),
                oracle::dice_ce(values(logits), N, C, H, W, labels), 1e-6)
        << fixture;
  }
}

TEST(DiceCe, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  for (int fixture = 0; fixture < 3; ++fixture) {
    auto logits = random_tensor({1, 4, 8, 8}, rng, -2, 2);
    const auto labels = random_mask(64, 4, rng);
    auto f = [&] { return dice_ce_loss(logits, labels).total; };
    const auto r = grad_check<double>(f, {logits}, exhaustive());
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
  }
}

TEST(Consistency, ValuesOracleAndGradientPath) {
  Tensor<double> a({1, 2, 1, 1}, std::vector<double>{1, 0});
  Tensor<double> b({1, 2, 1, 1}, std::vector<double>{0, 1});
  EXPECT_EQ(consistency_loss(a, a).item(), 0.0);
  EXPECT_EQ(consistency_loss(a, b).item(), 1.0);
  EXPECT_THROW(consistency_loss(a, Tensor<double>({1, 2, 1, 2})), std::invalid_argument);

  std::mt19937_64 rng(13);
  for (int fixture = 0; fixture < 20; ++fixture) {
    const std::size_t N = 1 + fixture % 4, C = 2 + fixture % 3, H = 4 + fixture % 5;
    NoGradGuard guard;
    const auto qs = softmax_channels(random_tensor({N, C, H, H}, rng, -3, 3));
    const auto qt = softmax_channels(random_tensor({N, C, H, H}, rng, -3, 3));
    EXPECT_NEAR(consistency_loss(qs, qt).item(), oracle::consistency(values(qs), values(qt)), 1e-12);
  }

  auto student = random_tensor({2, 3, 4, 4}, rng);
  auto teacher = random_tensor({2, 3, 4, 4}, rng);
  student.set_requires_grad(true);
  teacher.set_requires_grad(true);
  backward(consistency_loss(softmax_channels(student), softmax_channels(teacher)));
  EXPECT_TRUE(student.has_grad());
  EXPECT_FALSE(teacher.has_grad());
}

TEST(Consistency, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  for (int fixture = 0; fixture < 3; ++fixture) {
    auto logits = random_tensor({2, 4, 4, 4}, rng, -2, 2);
    Tensor<double> target;
    {
      NoGradGuard guard;
      target = softmax_channels(random_tensor({2, 4, 4, 4}, rng, -2, 2));
    }
    auto f = [&] { return consistency_loss(softmax_channels(logits), target); };
    const auto r = grad_check<double>(f, {logits}, exhaustive());
    EXPECT_LE(r.max_rel_error, 1e-6) << r.worst;
  }
}

TEST(Lambda3, ScheduleValues) {
  EXPECT_EQ(lambda3(100, 100), 0.1);
  EXPECT_NEAR(lambda3(0, 100), 0.1 * std::exp(-5.0), 1e-12);
  EXPECT_NEAR(lambda3(50, 100), 0.1 * std::exp(-1.25), 1e-12);
  double prev = -1;
  for (int i = 0; i <= 1000; ++i) {
    const double v = lambda3(i, 1000);
    EXPECT_GT(v, prev);
    prev = v;
  }
  EXPECT_THROW(lambda3(-1, 10), std::invalid_argument);
  EXPECT_THROW(lambda3(11, 10), std::invalid_argument);
  EXPECT_THROW(lambda3(0, 0), std::invalid_argument);
}

TEST(Stage2Total, GatingLinearityAndWeights) {
  Stage2Losses<double> l{Tensor<double>::scalar(0.7), Tensor<double>::scalar(1.3), Tensor<double>::scalar(0.4)};
  LossWeights w;
  const double l3 = lambda3(10, 10);
  EXPECT_EQ(stage2_total(l, w, l3, false).item(), 1.0 * 1.3 + l3 * 0.4);
  EXPECT_NEAR(stage2_total(l, w, l3, true).item(), 0.01 * 0.7 + 1.3 + 0.1 * 0.4, 1e-9);

  Stage2Losses<double> zero{Tensor<double>::scalar(0), Tensor<double>::scalar(0), Tensor<double>::scalar(0)};
  EXPECT_EQ(stage2_total(zero, w, l3, true).item(), 0.0);

  w.lambda1 = -0.1;
  EXPECT_THROW(stage2_total(l, w, l3, true), std::invalid_argument);
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w = {};
  EXPECT_THROW(stage2_total(l, w, -0.1, true), std::invalid_argument);
  w.threshold = 1.0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
}
