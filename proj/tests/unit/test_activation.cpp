#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "moelab/activation.hpp"
#include "moelab/errors.hpp"

using moe::Activation;

namespace {

std::vector<Activation> all_activations() {
  return {Activation::sigmoid(), Activation::gelu(), Activation::power(1), Activation::power(2),
          Activation::power(3), Activation::identity()};
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

}  // namespace

TEST(Activation, FirstDerivativeMatchesCentralDifference) {
  const double h = 1e-5;
  for (const Activation& act : all_activations()) {
    for (double z = -4.0; z <= 4.0; z += 0.37) {
      const double fd = (act.value(z + h) - act.value(z - h)) / (2 * h);
      EXPECT_LT(rel_err(act.d1(z), fd), 1e-6) << act.label() << " z=" << z;
    }
  }
}

TEST(Activation, SecondDerivativeMatchesCentralDifference) {
  const double h = 1e-4;
  for (const Activation& act : all_activations()) {
    for (double z = -4.0; z <= 4.0; z += 0.37) {
      const double fd = (act.d1(z + h) - act.d1(z - h)) / (2 * h);
      EXPECT_LT(rel_err(act.d2(z), fd), 1e-6) << act.label() << " z=" << z;
    }
  }
}

TEST(Activation, KnownValues) {
  EXPECT_DOUBLE_EQ(Activation::sigmoid().value(0.0), 0.5);
  EXPECT_DOUBLE_EQ(Activation::sigmoid().d1(0.0), 0.25);
  EXPECT_DOUBLE_EQ(Activation::gelu().value(0.0), 0.0);
  EXPECT_DOUBLE_EQ(Activation::gelu().d1(0.0), 0.5);
  // Exact GELU, not the tanh form: x * Phi(x) at x = 1.
  EXPECT_NEAR(Activation::gelu().value(1.0), 0.8413447460685429, 1e-15);
  EXPECT_DOUBLE_EQ(Activation::power(3).value(-2.0), -8.0);
  EXPECT_DOUBLE_EQ(Activation::identity().value(1.25), 1.25);
}

TEST(Activation, SigmoidStableInTails) {
  const Activation s = Activation::sigmoid();
  EXPECT_EQ(s.value(-800.0), 0.0);
  EXPECT_EQ(s.value(800.0), 1.0);
  EXPECT_TRUE(std::isfinite(s.d2(-800.0)));
}

TEST(Activation, PowerRejectsNonPositiveExponent) {
  EXPECT_THROW(Activation::power(0), moe::ArgumentError);
  EXPECT_THROW(Activation::power(-1), moe::ArgumentError);
}

TEST(Activation, Labels) {
  EXPECT_EQ(Activation::sigmoid().label(), "sigmoid");
  EXPECT_EQ(Activation::gelu().label(), "gelu");
  EXPECT_EQ(Activation::power(2).label(), "power2");
}
