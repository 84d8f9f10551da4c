#pragma once

#include <cstddef>
#include <cstdint>

#include "moelab/dataset.hpp"
#include "moelab/model.hpp"

namespace moe {

struct SampleConfig {
  enum class XDist { StandardNormal };

  std::size_t n = 0;
  std::uint64_t seed = 0;
  XDist x_dist = XDist::StandardNormal;
  /// Philox stream the draws come from.
  std::uint64_t stream = 0;
};

/// X ~ N(0, I_d), Z ~ Categorical(gate_weights(G, X)), Y ~ N(a_Z'X + b_Z, nu_Z).
Dataset sample_dataset(const MixingMeasure& g, const SampleConfig& cfg);

}  // namespace moe
