#include <gtest/gtest.h>

#include <cmath>

#include "moelab/batch.hpp"
#include "moelab/harness.hpp"
#include "moelab/sampling.hpp"

using namespace moe;

namespace {

MixingMeasure three_atom(GateSpec gate) {
  return MixingMeasure({Atom{0.3, {-1.2, 0.4}, {0.5, -1}, 1, 0.4}, Atom{-0.2, {0.8, 0.1}, {-0.3, 0.7}, -1, 0.9},
                        Atom{0, {0, 0}, {1, 1}, 0, 0.2}},
                       0.6, gate, true);
}

}  // namespace

class BatchAgainstPointwise : public ::testing::TestWithParam<bool> {};

TEST_P(BatchAgainstPointwise, LogLikAndResponsibilities) {
  const GateSpec gate = GetParam() ? GateSpec::linear() : GateSpec::activated(Activation::sigmoid());
  const MixingMeasure g = three_atom(gate);
  const Dataset data = sample_dataset(g, {777, 3});
  for (const simd::KernelTable* kern : {&simd::scalar_kernels(), simd::avx2_kernels()}) {
    if (kern == nullptr) continue;
    BatchWorkspace ws(*kern);
    ws.evaluate(g, data);
    EXPECT_NEAR(ws.mean_loglik(), log_likelihood(g, data), 1e-12) << kern->name;
    std::vector<double> resp;
    EXPECT_EQ(ws.responsibilities(resp), 0u);
    const std::size_t n = data.size();
    for (std::size_t i = 0; i < n; i += 37) {
      const Vec x = data.row(i);
      const Vec w = gate_weights(g, x);
      const double dens = conditional_density(g, x, data.y()[i]);
      double row = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const Atom& a = g.atom(j);
        const double m = a.a[0] * x[0] + a.a[1] * x[1] + a.b;
        const double want = w[j] * normal_pdf(data.y()[i], m, a.nu) / dens;
        EXPECT_NEAR(resp[j * n + i], want, 1e-12);
        row += resp[j * n + i];
      }
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Gates, BatchAgainstPointwise, ::testing::Values(true, false));

TEST(GateBatch, LogitsMatchPointwise) {
  const MixingMeasure g = three_atom(GateSpec::activated(Activation::gelu()));
  const Dataset data = sample_dataset(g, {50, 4});
  GateBatch b;
  b.compute(GateParams::from(g), data, simd::active_kernels());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vec l = gate_logits(g, data.row(i));
    const Vec w = gate_weights(g, data.row(i));
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(b.logits[j * data.size() + i], l[j], 1e-13);
      EXPECT_NEAR(std::exp(b.log_weight(j, i)), w[j], 1e-13);
    }
  }
}

TEST(BatchWorkspace, UnderflowRowsAreUniform) {
  const MixingMeasure g({Atom{0, {0}, {0}, 0, 1e-6}, Atom{0, {0}, {0}, 1, 1e-6}}, 1.0, GateSpec::linear(), true);
  const Dataset data = Dataset::from_rows({{0.0}, {0.0}}, {0.5, 1e200});
  BatchWorkspace ws;
  ws.evaluate(g, data);
  std::vector<double> resp;
  EXPECT_EQ(ws.responsibilities(resp), 1u);
  EXPECT_DOUBLE_EQ(resp[0 * 2 + 1], 0.5);
  EXPECT_DOUBLE_EQ(resp[1 * 2 + 1], 0.5);
}
