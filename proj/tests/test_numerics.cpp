// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "nae/errors.hpp"
#include "nae/numerics.hpp"

namespace nae {
namespace {

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

Matrix random_matrix(SeededRng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(-2.0, 2.0);
  return m;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix b = Matrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(Matrix::identity(2), b), b);
}

TEST(Matmul, RowTimesColumn) {
  const Matrix out = matmul(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{3}, {4}}));
  ASSERT_EQ(out.rows(), 1u);
  ASSERT_EQ(out.cols(), 1u);
  EXPECT_EQ(out(0, 0), 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  SeededRng rng(11);
  const Matrix a = random_matrix(rng, 5, 7);
  const Matrix b = random_matrix(rng, 7, 3);
  const Matrix got = matmul(a, b);
  const Matrix want = naive_product(a, b);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
}

TEST(Matmul, TransposedVariantsAgree) {
  SeededRng rng(12);
  const Matrix a = random_matrix(rng, 4, 6);
  const Matrix b = random_matrix(rng, 4, 5);
  const Matrix c = random_matrix(rng, 3, 6);
  const Matrix tn = matmul_tn(a, b);
  const Matrix tn_want = naive_product(a.transposed(), b);
  for (std::size_t i = 0; i < tn.size(); ++i) EXPECT_NEAR(tn.values()[i], tn_want.values()[i], 1e-12);
  const Matrix nt = matmul_nt(a, c);
  const Matrix nt_want = naive_product(a, c.transposed());
  for (std::size_t i = 0; i < nt.size(); ++i) EXPECT_NEAR(nt.values()[i], nt_want.values()[i], 1e-12);
}

TEST(Matmul, DimensionMismatchIsConfigError) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ConfigError);
}

TEST(SoftmaxMasked, UniformLogits) {
  const std::vector<double> logits{0, 0, 0, 0};
  for (double r : softmax_masked(logits, MaskVector(4))) EXPECT_DOUBLE_EQ(r, 0.25);
}

TEST(SoftmaxMasked, ThreeLogits) {
  const std::vector<double> logits{1, 2, 3};
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const auto r = softmax_masked(logits, MaskVector(3));
  EXPECT_NEAR(r[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(r[0], 0.09003, 1e-5);
  EXPECT_NEAR(r[1], 0.24473, 1e-5);
  EXPECT_NEAR(r[2], 0.66524, 1e-5);
}

TEST(SoftmaxMasked, MaskedEntriesAreExactlyZero) {
  const std::vector<double> logits{5, 1, 9, 2};
  const std::vector<double> mask_values{0, kNegInf, 0, kNegInf};
  const auto r = softmax_masked(logits, MaskVector::from_values(mask_values));
  EXPECT_EQ(r[1], 0.0);
  EXPECT_EQ(r[3], 0.0);
  const double z = std::exp(5.0) + std::exp(9.0);
  EXPECT_NEAR(r[0], std::exp(5.0) / z, 1e-15);
  EXPECT_NEAR(r[2], std::exp(9.0) / z, 1e-15);
}

TEST(SoftmaxMasked, NoOverflowAtLargeLogits) {
  const std::vector<double> logits{700, -700, 699};
  const auto r = softmax_masked(logits, MaskVector(3));
  for (double v : r) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(r[0] + r[1] + r[2], 1.0, 1e-12);
}

TEST(SoftmaxMasked, AllMaskedIsConfigError) {
  MaskVector mask(2);
  mask.set_active(0, false);
  mask.set_active(1, false);
  const std::vector<double> logits{1, 2};
  EXPECT_THROW(softmax_masked(logits, mask), ConfigError);
}

TEST(SoftmaxMasked, SumsToOneAndShiftInvariant) {
  SeededRng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    std::vector<double> logits(k);
    for (double& v : logits) v = rng.uniform(-50.0, 50.0);
    MaskVector mask(k);
    for (std::size_t j = 0; j < k; ++j) mask.set_active(j, rng.bernoulli(0.6));
    mask.set_active(rng.below(k), true);
    const auto r = softmax_masked(logits, mask);
    EXPECT_NEAR(std::accumulate(r.begin(), r.end(), 0.0), 1.0, 1e-12);
    const double shift = rng.uniform(-100.0, 100.0);
    std::vector<double> shifted = logits;
    for (double& v : shifted) v += shift;
    const auto r2 = softmax_masked(shifted, mask);
    for (std::size_t j = 0; j < k; ++j) EXPECT_NEAR(r[j], r2[j], 1e-12);
  }
}

TEST(MaskVector, RejectsValuesOtherThanZeroAndSentinel) {
  const std::vector<double> bad{0.0, 1.0};
  EXPECT_THROW(MaskVector::from_values(bad), ConfigError);
}

TEST(TopCMask, PicksLargest) {
  const std::vector<double> logits{3, 1, 2, 0};
  const MaskVector m = top_c_mask(logits, 2);
  EXPECT_TRUE(m.active(0));
  EXPECT_FALSE(m.active(1));
  EXPECT_TRUE(m.active(2));
  EXPECT_FALSE(m.active(3));
}

TEST(TopCMask, FullCountKeepsEverything) {
  const std::vector<double> logits{3, 1, 2, 0};
  EXPECT_EQ(top_c_mask(logits, 4).active_count(), 4u);
}

TEST(TopCMask, TiesGoToLowerIndex) {
  const std::vector<double> logits{1, 1, 1};
  const MaskVector m = top_c_mask(logits, 1);
  EXPECT_TRUE(m.active(0));
  EXPECT_FALSE(m.active(1));
  EXPECT_FALSE(m.active(2));

  // Stable sort by descending logit gives the same selection.
  const std::vector<double> tied{2, 5, 2, 5, 2};
  std::vector<std::size_t> order(tied.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return tied[a] > tied[b]; });
  const MaskVector m3 = top_c_mask(tied, 3);
  for (std::size_t r = 0; r < tied.size(); ++r) EXPECT_EQ(m3.active(order[r]), r < 3);
}

TEST(TopCMask, OutOfRangeCountIsConfigError) {
  const std::vector<double> logits{1, 2};
  EXPECT_THROW(top_c_mask(logits, 0), ConfigError);
  EXPECT_THROW(top_c_mask(logits, 3), ConfigError);
}

TEST(TopCMask, SelectionMaximizesSubsetSum) {
  SeededRng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + rng.below(8);
    const std::size_t c = 1 + rng.below(k);
    std::vector<double> logits(k);
    for (double& v : logits) v = static_cast<double>(rng.below(5));  // frequent ties
    const MaskVector m = top_c_mask(logits, c);
    ASSERT_EQ(m.active_count(), c);
    double chosen = 0.0;
    for (std::size_t j = 0; j < k; ++j)
      if (m.active(j)) chosen += logits[j];
    double best = -1e300;
    for (unsigned s = 0; s < (1u << k); ++s) {
      if (static_cast<std::size_t>(std::popcount(s)) != c) continue;
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j)
        if (s & (1u << j)) sum += logits[j];
      best = std::max(best, sum);
    }
    EXPECT_EQ(chosen, best);
  }
}

TEST(Gumbel, InverseTransformAtOneOverE) {
  EXPECT_NEAR(gumbel_from_uniform(1.0 / std::exp(1.0)), 0.0, 1e-15);
}

TEST(Gumbel, SameSeedSameMatrix) {
  SeededRng a(99), b(99);
  EXPECT_EQ(sample_gumbel(a, 3, 4), sample_gumbel(b, 3, 4));
}

TEST(Gumbel, MeanIsEulerMascheroni) {
  SeededRng rng(5);
  const Matrix g = sample_gumbel(rng, 1000, 1000);
  double s = 0.0;
  for (double v : g.values()) s += v;
  EXPECT_NEAR(s / static_cast<double>(g.size()), 0.5772156649, 0.01);
}

TEST(SeededRng, StreamIsReproducibleAndPinned) {
  SeededRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  SeededRng c(43);
  SeededRng d(42);
  EXPECT_NE(c.next_u64(), d.next_u64());
}

TEST(SeededRng, UniformOpenNeverHitsEndpoints) {
  SeededRng rng(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform_open();
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(SeededRng, BelowIsInRangeAndRoughlyUniform) {
  SeededRng rng(8);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(SeededRng, NormalMoments) {
  SeededRng rng(17);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(SeededRng, DerivedSeedsDiffer) {
  EXPECT_NE(SeededRng::derive_seed(5, 1), SeededRng::derive_seed(5, 2));
  EXPECT_NE(SeededRng::derive_seed(5, 1), SeededRng::derive_seed(6, 1));
  EXPECT_EQ(SeededRng::derive_seed(5, 1), SeededRng::derive_seed(5, 1));
}

TEST(ShuffledIndices, IsPermutation) {
  SeededRng rng(4);
  auto idx = shuffled_indices(100, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], i);
}

TEST(Activations, SoftplusAndSigmoidAreStable) {
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_GE(softplus(-1000.0), 0.0);
  EXPECT_LT(softplus(-1000.0), 1e-300);
  EXPECT_NEAR(sigmoid(0.0), 0.5, 1e-15);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_EQ(relu(-1.0), 0.0);
  EXPECT_EQ(relu(2.5), 2.5);
}

TEST(NormalQuantile, KnownValues) {
  EXPECT_NEAR(normal_quantile(0.5), 0.0, 1e-12);
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-8);
  EXPECT_NEAR(normal_quantile(0.025), -1.959963984540054, 1e-8);
  EXPECT_NEAR(normal_quantile(0.841344746068543), 1.0, 1e-8);
  EXPECT_NEAR(normal_quantile(1e-6), -4.753424308822899, 1e-6);
}

TEST(FormatReal, RoundTripsExactly) {
  SeededRng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20.0, 20.0));
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.5), "0.5");
}

}  // namespace
}  // namespace nae
