#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "moelab/rng.hpp"
#include "moelab/simd/kernels.hpp"

using moe::simd::KernelTable;

namespace {

std::vector<double> draws(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  moe::Philox r(seed);
  std::vector<double> v(n);
  for (double& x : v) x = scale * r.normal();
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double rel) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isinf(a[i]) || std::isinf(b[i])) {
      EXPECT_EQ(a[i], b[i]) << i;
      continue;
    }
    EXPECT_LE(std::abs(a[i] - b[i]), rel * std::max(1.0, std::abs(b[i]))) << i;
  }
}

class KernelEquivalence : public ::testing::TestWithParam<std::size_t> {
 protected:
  void SetUp() override {
    vec_ = moe::simd::avx2_kernels();
    if (vec_ == nullptr) GTEST_SKIP() << "AVX2 kernels not available on this machine";
  }
  const KernelTable& ref() const { return moe::simd::scalar_kernels(); }
  const KernelTable* vec_ = nullptr;
};

}  // namespace

TEST(Kernels, ActiveTableIsKnown) {
  const auto name = moe::simd::active_kernels().name;
  EXPECT_TRUE(name == "scalar" || name == "avx2");
  EXPECT_EQ(moe::simd::scalar_kernels().name, "scalar");
}

TEST(Kernels, ScalarReferenceValues) {
  const KernelTable& k = moe::simd::scalar_kernels();
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6}, w{0.5, 1, 2};
  EXPECT_DOUBLE_EQ(k.sum(a.data(), 3), 6.0);
  EXPECT_DOUBLE_EQ(k.dot(a.data(), b.data(), 3), 32.0);
  EXPECT_DOUBLE_EQ(k.weighted_dot(w.data(), a.data(), b.data(), 3), 2.0 + 10.0 + 36.0);
  double lp = 0.0;
  const double y = 1.0, m = 0.0;
  k.gaussian_logpdf(&y, &m, 1, 4.0, &lp);
  EXPECT_NEAR(lp, -0.5 * std::log(2 * M_PI * 4.0) - 0.125, 1e-15);
  const std::vector<double> cols{0.0, std::log(3.0)};
  double lse = 0.0;
  k.logsumexp_cols(cols.data(), 2, 1, &lse);
  EXPECT_NEAR(lse, std::log(4.0), 1e-15);
}

TEST_P(KernelEquivalence, Affine) {
  const std::size_t n = GetParam();
  const auto x = draws(3 * n, 1);
  const std::vector<double> coef{0.3, -1.2, 2.5};
  std::vector<double> o1(n), o2(n);
  ref().affine(x.data(), n, coef, 0.7, o1.data());
  vec_->affine(x.data(), n, coef, 0.7, o2.data());
  expect_close(o2, o1, 1e-14);
}

TEST_P(KernelEquivalence, GaussianLogpdf) {
  const std::size_t n = GetParam();
  const auto y = draws(n, 2, 3.0), m = draws(n, 3);
  std::vector<double> o1(n), o2(n);
  ref().gaussian_logpdf(y.data(), m.data(), n, 0.37, o1.data());
  vec_->gaussian_logpdf(y.data(), m.data(), n, 0.37, o2.data());
  expect_close(o2, o1, 1e-13);
}

TEST_P(KernelEquivalence, AccumulateGaussianPdf) {
  const std::size_t n = GetParam();
  const auto y = draws(n, 4, 2.0);
  std::vector<double> o1(n, 0.1), o2(n, 0.1);
  ref().accumulate_gaussian_pdf(y.data(), n, 0.2, 0.8, 0.6, o1.data());
  vec_->accumulate_gaussian_pdf(y.data(), n, 0.2, 0.8, 0.6, o2.data());
  expect_close(o2, o1, 1e-13);
}

TEST_P(KernelEquivalence, LogSumExpCols) {
  const std::size_t n = GetParam();
  const std::size_t k = 3;
  auto cols = draws(k * n, 5, 30.0);
  // A column of -inf rows and a fully -inf row exercise the guards.
  if (n > 2) {
    for (std::size_t j = 0; j < k; ++j) cols[j * n + 1] = -std::numeric_limits<double>::infinity();
    cols[2] = -std::numeric_limits<double>::infinity();
  }
  std::vector<double> o1(n), o2(n);
  ref().logsumexp_cols(cols.data(), k, n, o1.data());
  vec_->logsumexp_cols(cols.data(), k, n, o2.data());
  expect_close(o2, o1, 1e-13);
}

TEST_P(KernelEquivalence, ExpShifted) {
  const std::size_t n = GetParam();
  const auto in = draws(n, 6, 20.0), sh = draws(n, 7, 5.0);
  std::vector<double> o1(n), o2(n);
  ref().exp_shifted(in.data(), sh.data(), n, o1.data());
  vec_->exp_shifted(in.data(), sh.data(), n, o2.data());
  for (std::size_t i = 0; i < n; ++i) EXPECT_LE(std::abs(o2[i] - o1[i]), 1e-13 * o1[i] + 1e-300) << i;
}

TEST_P(KernelEquivalence, Reductions) {
  const std::size_t n = GetParam();
  const auto w = draws(n, 8), a = draws(n, 9), b = draws(n, 10);
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(w[i] * a[i] * b[i]) + std::abs(w[i] * a[i]) + std::abs(a[i]);
  const double tol = 1e-14 * (abs_sum + 1.0);
  EXPECT_NEAR(vec_->sum(a.data(), n), ref().sum(a.data(), n), tol);
  EXPECT_NEAR(vec_->dot(w.data(), a.data(), n), ref().dot(w.data(), a.data(), n), tol);
  EXPECT_NEAR(vec_->weighted_dot(w.data(), a.data(), b.data(), n), ref().weighted_dot(w.data(), a.data(), b.data(), n),
              tol);
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelEquivalence, ::testing::Values(0, 1, 3, 4, 5, 7, 8, 17, 1000, 4099));
