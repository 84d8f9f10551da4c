#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "moelab/dataset.hpp"
#include "moelab/model.hpp"
#include "moelab/rng.hpp"
#include "moelab/simd/kernels.hpp"

namespace moe {

/// Start every fitted atom near a true component. `cell_plan[j]` names the true
/// component fitted atom j starts from; it must hit every true component.
struct NearTruthInit {
  MixingMeasure truth;
  double jitter_sd = 0.1;
  std::optional<std::vector<std::size_t>> cell_plan;
};

struct RandomInit {
  double scale = 1.0;
};

using InitSpec = std::variant<NearTruthInit, RandomInit>;

struct FitConfig {
  std::size_t k = 2;
  GateSpec gate = GateSpec::linear();
  int max_em_iters = 1000;
  double em_tol = 1e-6;
  int irls_iters = 100;
  double irls_step = 0.01;
  double tau_min = 1e-3;
  double nu_min = 1e-8;
  bool pin_last_atom = true;
  /// Use the gradient blocks (x, 1, -(beta1'x+beta0)/tau^2) without the 1/tau
  /// factor on the first two blocks.
  bool paper_gradient = false;
  /// IRLS stops early once the gradient norm drops below this.
  double irls_grad_tol = 1e-10;
};

struct FitResult {
  MixingMeasure measure;
  std::vector<double> loglik_trace;
  bool converged = false;
  int iters = 0;
  /// Experts re-seeded after their responsibility mass vanished.
  int reseeds = 0;
  /// Expert solves that needed the ridge fallback.
  int ridge_fallbacks = 0;
  /// E-step rows where every expert underflowed.
  std::size_t underflow_rows = 0;
  /// The iteration loop stopped because the likelihood dropped (numerical breakdown).
  bool stalled = false;
  /// Accepted IRLS steps summed over all iterations.
  std::size_t irls_steps = 0;
  /// The gate ran into the weight cap during the final iteration (the
  /// unconstrained optimum has a diverging weight, e.g. separated gating).
  bool weight_capped = false;
};

/// Responsibilities, k x n expert-major, plus diagnostics.
struct EStepResult {
  std::vector<double> resp;
  std::size_t n = 0;
  std::size_t k = 0;
  double mean_loglik = 0.0;
  std::size_t underflow_rows = 0;

  double operator()(std::size_t i, std::size_t j) const { return resp[j * n + i]; }
};

EStepResult e_step(const MixingMeasure& g, const Dataset& data,
                   const simd::KernelTable& kern = simd::active_kernels());

struct ExpertUpdate {
  std::vector<Vec> a;
  std::vector<double> b;
  std::vector<double> nu;
  std::vector<bool> ridge;
};

/// Responsibility-weighted least squares on (x, 1) for every expert; nu is the
/// weighted mean squared residual under the new coefficients, floored at nu_min.
/// `resp` is k x n expert-major.
ExpertUpdate m_step_experts(const Dataset& data, std::span<const double> resp, std::size_t k, double nu_min = 1e-8,
                            const simd::KernelTable& kern = simd::active_kernels());

/// Free gating coordinates: (beta1_j, beta0_j) for every non-pinned atom, then tau.
struct GatingState {
  std::vector<Vec> beta1;
  std::vector<double> beta0;
  double tau = 1.0;
};

struct IrlsReport {
  int steps_taken = 0;
  int steps_rejected = 0;
  int damping_events = 0;
  /// Trial steps refused because an atom weight would pass the cap.
  int cap_rejections = 0;
  double q_before = 0.0;
  double q_after = 0.0;
  /// Q trace after each accepted step (first entry is the start value).
  std::vector<double> q_trace;
};

/// Mean expected complete-data gating log-likelihood (1/n) sum_ij r_ij log w_j(x_i).
double gating_objective(const GatingState& s, const GateSpec& gate, const Dataset& data, std::span<const double> resp,
                        const simd::KernelTable& kern = simd::active_kernels());

/// Analytic gradient of gating_objective over the free coordinates, flattened as
/// [beta1_0.., beta0_0, beta1_1.., beta0_1, ..., tau]. With `pinned`, the last
/// atom's (beta1, beta0) are excluded.
std::vector<double> gating_gradient(const GatingState& s, const GateSpec& gate, bool pinned, const Dataset& data,
                                    std::span<const double> resp, bool paper_gradient = false,
                                    const simd::KernelTable& kern = simd::active_kernels());

/// Damped Fisher-scoring ascent on gating_objective. Steps start at
/// cfg.irls_step times the Newton direction and are halved (up to 10 times)
/// until the objective does not decrease; tau is projected onto [tau_min, inf).
GatingState irls_gating_step(const GatingState& start, const Dataset& data, std::span<const double> resp,
                             const FitConfig& cfg, IrlsReport* report = nullptr,
                             const simd::KernelTable& kern = simd::active_kernels());

MixingMeasure init_measure(const InitSpec& spec, std::size_t k, std::size_t d, const GateSpec& gate, bool pinned,
                           Philox& rng, double tau_min = 1e-3, double nu_min = 1e-8);

/// Uniformly random surjection [k] -> [k_star]. With `pin_singleton`, fitted atom
/// k-1 is mapped alone onto true component k_star-1.
std::vector<std::size_t> random_cell_plan(std::size_t k, std::size_t k_star, bool pin_singleton, Philox& rng);

FitResult em_fit(const Dataset& data, const FitConfig& cfg, const MixingMeasure& init,
                 const simd::KernelTable& kern = simd::active_kernels());

/// Convenience: draws the initialization from `spec` with `rng` first.
FitResult em_fit(const Dataset& data, const FitConfig& cfg, const InitSpec& spec, Philox& rng);

}  // namespace moe
