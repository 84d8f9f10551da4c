#pragma once

// Batched per-point / per-expert evaluation shared by the likelihood, the
// E-step and the IRLS gating step. All k x n arrays are expert-major: entry
// (j, i) lives at [j*n + i].

#include <cstddef>
#include <span>
#include <vector>

#include "moelab/dataset.hpp"
#include "moelab/model.hpp"
#include "moelab/simd/kernels.hpp"

namespace moe {

/// Gating parameters detached from a MixingMeasure so trial points outside the
/// weight cap can still be scored.
struct GateParams {
  std::vector<double> beta0;
  std::vector<Vec> beta1;
  double tau = 1.0;
  GateSpec gate = GateSpec::linear();

  static GateParams from(const MixingMeasure& g);
  std::size_t size() const { return beta0.size(); }
};

/// Gate scores for every (expert, point).
struct GateBatch {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<double> pre;     ///< beta1_j'x_i
  std::vector<double> logits;  ///< (gate(pre) + beta0_j) / tau
  std::vector<double> lse;     ///< log sum_j exp(logits), per point

  void compute(const GateParams& p, const Dataset& data, const simd::KernelTable& kern);
  double log_weight(std::size_t j, std::size_t i) const { return logits[j * n + i] - lse[i]; }
};

class BatchWorkspace {
 public:
  explicit BatchWorkspace(const simd::KernelTable& kern = simd::active_kernels()) : kern_(&kern) {}

  /// Fills gate scores, log joint terms log w_j(x_i) + log N(y_i | mean_ij, nu_j)
  /// and their per-point log-sum-exp.
  void evaluate(const MixingMeasure& g, const Dataset& data);

  const GateBatch& gate() const { return gate_; }
  std::span<const double> log_joint() const { return log_joint_; }
  std::span<const double> lse_joint() const { return lse_joint_; }

  /// Mean of lse_joint; -inf if any point has zero density.
  double mean_loglik() const;

  /// Posterior responsibilities, k x n expert-major. Rows whose joint density
  /// underflows entirely are set uniform and counted.
  std::size_t responsibilities(std::vector<double>& out) const;

  const simd::KernelTable& kernels() const { return *kern_; }

 private:
  const simd::KernelTable* kern_;
  GateBatch gate_;
  std::vector<double> mean_;
  std::vector<double> log_joint_;
  std::vector<double> lse_joint_;
};

}  // namespace moe
