#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "emap/eval/metrics.hpp"
#include "emap/util/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace emap {
namespace {

using testing::pairwise_auc;

TEST(Roc, WorkedExample) {
  const std::vector<float> s{0.9f, 0.4f, 0.6f, 0.1f};
  const std::vector<int> l{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(roc_auc(s, l).auc, 0.75);
}

TEST(Roc, PerfectSeparationAndCurveEnds) {
  const std::vector<float> s{3.0f, 2.0f, -1.0f, -2.0f};
  const std::vector<int> l{1, 1, 0, 0};
  const RocCurve c = roc_auc(s, l);
  EXPECT_EQ(c.auc, 1.0);
  EXPECT_EQ(c.points.front().fpr, 0.0);
  EXPECT_EQ(c.points.front().tpr, 0.0);
  EXPECT_EQ(c.points.back().fpr, 1.0);
  EXPECT_EQ(c.points.back().tpr, 1.0);
}

TEST(Roc, SingleClassRejected) {
  const std::vector<float> s{1.0f, 2.0f};
  EXPECT_THROW(roc_auc(s, std::vector<int>{1, 1}), ArgumentError);
}

// Scores are quantized so that ties between classes are common.
TEST(Roc, TrapezoidMatchesPairwiseOracle) {
  for (std::uint64_t inst = 0; inst < 100; ++inst) {
    Rng rng(derive_seed(7, "auc", inst));
    const std::size_t n = 2 + rng.below(199);
    std::vector<float> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      l[i] = i < 1 ? 0 : (i < 2 ? 1 : static_cast<int>(rng.below(2)));
      s[i] = static_cast<float>(rng.below(20)) * 0.25f + (l[i] ? 0.5f : 0.0f);
    }
    EXPECT_NEAR(roc_auc(s, l).auc, pairwise_auc(s, l), 1e-9) << "instance " << inst;
  }
}

TEST(Roc, ShuffledLabelsNearChance) {
  Rng rng(11);
  const std::size_t n = 10000;
  std::vector<float> s(n);
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = static_cast<float>(rng.uniform());
    l[i] = static_cast<int>(i % 2);
  }
  for (std::size_t i = n; i > 1; --i) std::swap(l[i - 1], l[rng.below(i)]);
  const double auc = roc_auc(s, l).auc;
  EXPECT_GT(auc, 0.47);
  EXPECT_LT(auc, 0.53);
}

TEST(Ssim, IdentityIsOne) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Tensor x = testing::random_tensor<float>({32, 32}, k);
    EXPECT_EQ(ssim(x.data(), x.data(), 32, 32), 1.0);
  }
}

TEST(Ssim, ConstantImages) {
  const Tensor zero = Tensor::zeros({16, 16}), one = Tensor::ones({16, 16});
  EXPECT_DOUBLE_EQ(ssim(zero.data(), one.data(), 16, 16), 1.0);
  SsimOptions raw;
  raw.normalize = false;
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(zero.data(), one.data(), 16, 16, raw), c1 / (1.0 + c1), 1e-15);
}

TEST(Ssim, SymmetricAndBounded) {
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Tensor a = testing::random_tensor<float>({24, 20}, 100 + k);
    const Tensor b = testing::random_tensor<float>({24, 20}, 200 + k);
    const double ab = ssim(a.data(), b.data(), 24, 20), ba = ssim(b.data(), a.data(), 24, 20);
    EXPECT_NEAR(ab, ba, 1e-12);  // fused multiply-add may differ in the last bit
    EXPECT_LT(ab, 1.0);
    EXPECT_GT(ab, -1.0);
  }
}

TEST(Ssim, ShapeErrors) {
  const Tensor a = Tensor::zeros({8, 8});
  EXPECT_THROW(ssim(a.data(), a.data(), 8, 8), ShapeError);  // smaller than the window
  const Tensor b = Tensor::zeros({16, 16});
  EXPECT_THROW(ssim(b.data(), a.data(), 16, 16), ShapeError);
}

TEST(Overlap, SelectionCount) {
  EXPECT_EQ(top_k_count(4096, 0.01), 41u);
  EXPECT_EQ(top_k_count(100, 0.07), 7u);
  EXPECT_EQ(top_k_count(10, 1.0), 10u);
  EXPECT_THROW(top_k_count(10, 0.0), ArgumentError);
}

TEST(Overlap, AllSelectedInsideMaskAndMapEqualsMask) {
  std::vector<float> mask(64 * 64, 0.0f);
  for (std::size_t i = 1000; i < 1113; ++i) mask[i] = 1.0f;
  EXPECT_EQ(overlap_top_k(mask, mask, 0.01), 100.0);
  std::vector<float> map(mask.size(), 0.0f);
  for (std::size_t i = 1000; i < 1041; ++i) map[i] = 5.0f;
  EXPECT_EQ(overlap_top_k(map, mask, 0.01), 100.0);
}

TEST(Overlap, TiesTakenInRasterOrder) {
  std::vector<float> map(100, 1.0f);
  std::vector<float> mask(100, 0.0f);
  mask[0] = mask[1] = 1.0f;
  mask[99] = 1.0f;
  EXPECT_DOUBLE_EQ(overlap_top_k(map, mask, 0.04), 50.0);  // picks pixels 0..3
}

TEST(Overlap, EmptyMaskRejected) {
  const std::vector<float> map(16, 1.0f), mask(16, 0.0f);
  EXPECT_THROW(overlap_top_k(map, mask), ArgumentError);
}

// Uniform random maps: the expected overlap equals the mask fraction.
TEST(Overlap, RandomMapConvergesToMaskFraction) {
  const std::size_t S = 64;
  std::vector<float> mask(S * S, 0.0f);
  std::size_t area = 0;
  for (int y = -6; y <= 6; ++y)
    for (int x = -6; x <= 6; ++x)
      if (x * x + y * y <= 36) {
        mask[(32 + y) * S + 32 + x] = 1.0f;
        ++area;
      }
  const double expected = 100.0 * static_cast<double>(area) / static_cast<double>(S * S);
  Rng rng(5);
  std::vector<float> map(S * S);
  double total = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    for (auto& v : map) v = static_cast<float>(rng.uniform());
    total += overlap_top_k(map, mask, 0.01);
  }
  EXPECT_NEAR(total / trials, expected, 2.0);
}

TEST(Histogram, OnlyPositiveValuesShareEdges) {
  const std::vector<float> normal{-1.0f, 2.0f, 2.0f};
  const auto h = positive_pixel_histogram(normal, {}, 50);
  ASSERT_EQ(h.size(), 50u);
  std::size_t nonempty = 0;
  for (const auto& b : h) {
    if (b.count_normal) {
      ++nonempty;
      EXPECT_EQ(b.count_normal, 2u);
    }
    EXPECT_EQ(b.count_abnormal, 0u);
  }
  EXPECT_EQ(nonempty, 1u);
  EXPECT_DOUBLE_EQ(h.back().hi, 2.0);
}

TEST(Histogram, AllZeroMapsGiveNoBins) {
  const std::vector<float> z(10, 0.0f);
  EXPECT_TRUE(positive_pixel_histogram(z, z).empty());
}

TEST(Metrics, CountsAndEstimationError) {
  const std::vector<float> t{1.0f, -1.0f, 2.0f, -3.0f, 0.5f};
  const std::vector<float> that{1.0f, 0.5f, -2.0f, -3.0f, 0.25f};
  const std::vector<int> l{1, 0, 1, 0, 0};
  const MetricsReport r = summarize(t, that, l);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fp, 2u);
  EXPECT_EQ(r.tn, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(r.tp + r.tn) / 5.0);
  EXPECT_DOUBLE_EQ(r.estimation_mse, (0.0 + 2.25 + 16.0 + 0.0 + 0.0625) / 5.0);
  EXPECT_DOUBLE_EQ(r.estimation_mae, (0.0 + 1.5 + 4.0 + 0.0 + 0.25) / 5.0);
  EXPECT_EQ(summarize(t, t, l).estimation_mse, 0.0);
  EXPECT_DOUBLE_EQ(r.blackbox_accuracy, 0.8);
}

}  // namespace
}  // namespace emap
