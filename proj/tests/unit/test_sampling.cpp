#include <gtest/gtest.h>

#include <cmath>

#include "moelab/csv_io.hpp"
#include "moelab/errors.hpp"
#include "moelab/harness.hpp"
#include "moelab/sampling.hpp"

using namespace moe;

namespace {

MixingMeasure one_expert(double a, double b, double nu) { return MixingMeasure({Atom{0, {0}, {a}, b, nu}}, 1.0, GateSpec::linear()); }

}  // namespace

TEST(Sampling, DegenerateVariance) {
  const Dataset d = sample_dataset(one_expert(0, 3, 1e-12), {500, 1});
  for (double y : d.y()) EXPECT_NEAR(y, 3.0, 1e-4);
}

TEST(Sampling, ForcedGateUsesFirstExpert) {
  const MixingMeasure g({Atom{50, {0}, {1.5}, -1, 0.2}, Atom{0, {0}, {-3}, 4, 0.2}}, 1.0, GateSpec::linear(), true);
  const std::size_t n = 20000;
  const Dataset d = sample_dataset(g, {n, 2});
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += d.y()[i] - (1.5 * d.x(i, 0) - 1);
  EXPECT_LT(std::abs(s / n), 4 * std::sqrt(0.2 / n));
}

TEST(Sampling, ReferenceTruthConditionalMeanNearZero) {
  const Dataset d = sample_dataset(reference_truth(), {100000, 3});
  double s = 0.0;
  int c = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::abs(d.x(i, 0)) < 0.05) {
      s += d.y()[i];
      ++c;
    }
  }
  ASSERT_GT(c, 100);
  EXPECT_NEAR(s / c, 2.0, 0.1);
}

TEST(Sampling, Reproducible) {
  const SampleConfig cfg{1000, 77};
  EXPECT_EQ(dataset_to_csv(sample_dataset(reference_truth(), cfg)), dataset_to_csv(sample_dataset(reference_truth(), cfg)));
  EXPECT_NE(dataset_to_csv(sample_dataset(reference_truth(), cfg)), dataset_to_csv(sample_dataset(reference_truth(), {1000, 78})));
}

TEST(Sampling, CovariateMarginals) {
  const MixingMeasure g({Atom{0, {0, 0, 0}, {1, 0, 0}, 0, 1}}, 1.0, GateSpec::linear());
  const std::size_t n = 50000;
  const Dataset d = sample_dataset(g, {n, 4});
  for (std::size_t u = 0; u < 3; ++u) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += d.x(i, u);
      s2 += d.x(i, u) * d.x(i, u);
    }
    const double mean = s / n;
    EXPECT_NEAR(mean, 0.0, 5 / std::sqrt(double(n)));
    EXPECT_NEAR(s2 / n - mean * mean, 1.0, 5 * std::sqrt(2.0 / n));
  }
}

TEST(Sampling, ReferenceTruthGateSaturatesOnTheLeft) {
  const Dataset d = sample_dataset(reference_truth(), {50000, 5});
  int left = 0, closer_to_first = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double x = d.x(i, 0);
    if (x >= -1) continue;
    ++left;
    const double r1 = std::abs(d.y()[i] - (-x + 2));
    const double r2 = std::abs(d.y()[i] - (x + 2));
    closer_to_first += r1 < r2 ? 1 : 0;
  }
  ASSERT_GT(left, 1000);
  EXPECT_GT(double(closer_to_first) / left, 0.95);
}

TEST(Sampling, RejectsEmpty) { EXPECT_THROW(sample_dataset(reference_truth(), {0, 1}), ArgumentError); }
