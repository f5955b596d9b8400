#include <gtest/gtest.h>

#include <cmath>

#include "logsieve/matrix.hpp"
#include "logsieve/rng.hpp"

namespace {

using logsieve::Matrix;
using logsieve::Rng;

void fill_random(Matrix<float>& m, Rng& rng) {
  for (auto& x : m.data) x = static_cast<float>(rng.uniform_real() - 0.5);
}

TEST(Matrix, MatmulMatchesReferenceAcrossShapes) {
  Rng rng(7);
  const int shapes[][3] = {{1, 1, 1},   {7, 13, 17},  {12, 32, 32}, {13, 256, 24},
                           {65, 64, 80}, {100, 5, 100}, {33, 19, 7}};
  for (auto [m, k, n] : shapes) {
    Matrix<float> a(m, k), b(k, n), c(m, n), ref(m, n);
    fill_random(a, rng);
    fill_random(b, rng);
    fill_random(c, rng);
    ref = c;
    logsieve::matmul(a, b, c, /*accumulate=*/true);
    logsieve::detail::gemm_generic(a.data.data(), b.data.data(), ref.data.data(), m, k, n, true);
    for (size_t i = 0; i < c.size(); ++i)
      ASSERT_NEAR(c.data[i], ref.data[i], 1e-4f) << "shape " << m << "x" << k << "x" << n;
  }
}

TEST(Matrix, MatmulRejectsShapeMismatch) {
  Matrix<float> a(2, 3), b(4, 2), c(2, 2);
  EXPECT_THROW(logsieve::matmul(a, b, c), std::invalid_argument);
}

TEST(Matrix, TransposeRoundTrip) {
  Rng rng(3);
  Matrix<float> a(5, 9);
  fill_random(a, rng);
  auto t = logsieve::transposed(a);
  ASSERT_EQ(t.rows, 9);
  ASSERT_EQ(t.cols, 5);
  auto back = logsieve::transposed(t);
  EXPECT_EQ(back.data, a.data);
}

TEST(Rng, DeterministicAcrossInstances) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, SubstreamsDiffer) {
  Rng a = Rng::substream(1, 0, 0);
  Rng b = Rng::substream(1, 0, 1);
  EXPECT_NE(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformIntBounds) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    int x = rng.uniform_int(7);
    EXPECT_GE(x, 0);
    EXPECT_LT(x, 7);
  }
  EXPECT_THROW(rng.uniform_u64(0), std::invalid_argument);
}

TEST(Rng, SampleWithoutReplacementIsDistinct) {
  Rng rng(11);
  auto idx = rng.sample_without_replacement(20, 10);
  ASSERT_EQ(idx.size(), 10u);
  std::sort(idx.begin(), idx.end());
  EXPECT_TRUE(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
  for (int v : idx) {
    EXPECT_GE(v, 0);
    EXPECT_LT(v, 20);
  }
}

TEST(Rng, NormalMomentsRoughlyStandard) {
  Rng rng(5);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, TruncatedNormalStaysInBounds) {
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    double x = rng.truncated_normal(0.02);
    EXPECT_LE(std::abs(x), 0.04 + 1e-12);
  }
}

TEST(Rng, CategoricalFollowsWeights) {
  Rng rng(13);
  std::vector<double> w = {0.5, 0.3, 0.2};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.categorical(w)]++;
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(counts[i] / double(n), w[i], 0.01);
}

}  // namespace
