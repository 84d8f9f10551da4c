#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "moelab/analysis.hpp"
#include "moelab/em.hpp"
#include "moelab/metrics.hpp"
#include "moelab/model.hpp"

namespace moe {

/// Two-expert, d = 1 reference truth: tau = 0.5,
/// (beta0, beta1, a, b, nu) = (0, -10, -1, 2, 0.3) and (0, 0, 1, 2, 0.4).
MixingMeasure reference_truth(GateSpec gate = GateSpec::linear());

/// `count` log-spaced integers from lo to hi inclusive (rounded, deduplicated).
std::vector<std::size_t> log_grid(double lo, double hi, int count);

struct ExperimentConfig {
  enum class Setting { Exact, Over };

  MixingMeasure truth = reference_truth();
  Setting setting = Setting::Exact;
  GateSpec gate = GateSpec::linear();
  std::vector<std::size_t> n_grid = log_grid(1e4, 1e5, 20);
  int replications = 40;
  std::vector<LossKind> losses = {LossKind::d1(2), LossKind::d2()};
  /// k and gate are filled in from setting and gate.
  FitConfig fit;
  double jitter_sd = 0.1;
  std::uint64_t seed = 1;
  /// 0 means one per hardware thread; MOE_LAB_WORKERS overrides.
  int workers = 0;

  /// Fitted atom count implied by the setting.
  std::size_t fitted_k() const { return setting == Setting::Exact ? truth.size() : truth.size() + 1; }
  void validate() const;
};

/// n_grid = 10 log-spaced in [1e3, 2e4], 10 replications, max_em_iters = 300.
void apply_desk_profile(ExperimentConfig& cfg);

/// Every key is optional; unknown keys throw ArgumentError. A top-level
/// "profile": "desk" applies the desk profile after the other fields.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

struct ExperimentRow {
  std::size_t n = 0;
  int replication = 0;
  std::string loss_kind;
  /// NaN when the fit failed or was degenerate.
  double value = 0.0;
  int em_iters = 0;
  bool converged = false;
  std::uint64_t seed = 0;
};

struct Aggregate {
  std::string loss_kind;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  std::size_t count = 0;
};

struct SlopeRow {
  std::string loss_kind;
  SlopeFit fit;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  std::vector<Aggregate> aggregates;
  std::vector<SlopeRow> slopes;
  std::size_t tasks = 0;
  std::size_t failures = 0;
  /// Fits that ended against the weight cap; left out of the aggregates but
  /// not counted as failures.
  std::size_t degenerate = 0;
  std::vector<std::string> failure_messages;
  bool degraded = false;
};

/// One replication: sample, initialize near the truth, fit, score every loss.
struct ReplicationOutcome {
  FitResult fit;
  std::vector<double> losses;
};
ReplicationOutcome run_replication(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed);

int resolve_workers(const ExperimentConfig& cfg);

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(std::size_t done, std::size_t total)>& progress = {});

/// Mean / sample sd per (loss_kind, n) over rows with a value, in row order.
std::vector<Aggregate> aggregate_rows(const std::vector<ExperimentRow>& rows);
/// Log-log fit of mean loss on n per loss kind (needs two positive means).
std::vector<SlopeRow> fit_slopes(const std::vector<Aggregate>& aggregates);

std::string raw_csv(const ExperimentResult& result);
std::string summary_csv(const ExperimentResult& result);
std::string slopes_csv(const ExperimentResult& result);
std::string summary_json(const ExperimentResult& result);

void emit_csv(const ExperimentResult& result, const std::string& path);
/// Writes the summary CSV to `path` and the slope JSON block next to it.
void emit_summary(const ExperimentResult& result, const std::string& path, const std::string& json_path);

}  // namespace moe
