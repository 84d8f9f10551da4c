#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "moelab/activation.hpp"

namespace moe {

/// Smallest order at which the cell-size-m moment system has only trivial
/// solutions. 1 -> 2 is a placeholder; m >= 4 throws UnsupportedError.
int rbar_known(int m);

/// Unknowns of the moment system laid out as [p_1..p_m, q1_1..q1_m, q2_1..q2_m].
struct PolySystem {
  int m = 1;
  int r = 1;
};

/// Entry s-1 is sum_l sum_{n1 + 2 n2 = s} p_l^2 q1_l^n1 q2_l^n2 / (n1! n2!).
std::vector<double> poly_residuals(const PolySystem& sys, const std::vector<double>& values);

struct SearchOptions {
  int restarts = 200;
  std::uint64_t seed = 1;
  int max_iters = 400;
  double found_tol = 1e-10;
  /// Lower bounds on |p_l| and max |q1_l|.
  double p_floor = 1e-2;
  double q_floor = 1e-2;
};

struct SearchResult {
  bool found = false;
  /// Best point reached, normalized so that sum p^2 = 1 and sum q1^2 = 1.
  std::vector<double> values;
  double best_norm = 0.0;
  int restarts_used = 0;
};

/// Random restarts of damped Gauss-Newton over the nontrivial region. Only
/// numerical evidence: a NotFound verdict says nothing beyond the searched starts.
SearchResult search_nontrivial(const PolySystem& sys, const SearchOptions& opts = {});

struct IndependenceResult {
  double min_sv_ratio = 0.0;
  bool independent = false;
  std::size_t n_features = 0;
  std::size_t n_probe = 0;
};

/// Number of distinct functions in the first- or second-order set for dimension d.
std::size_t independence_feature_count(int order, std::size_t d);

/// Feature matrix (n_probe x features, row-major) of the order-1 or order-2
/// function set at X ~ N(0, I) probes, before normalization.
std::vector<double> independence_features(const Activation& act, int order, const std::vector<double>& w,
                                          std::size_t n_probe, std::uint64_t seed);

/// n_probe = 0 picks 64 x the feature count. Columns are scaled to unit RMS
/// before the singular values are taken.
IndependenceResult independence_check(const Activation& act, int order, const std::vector<double>& w,
                                      std::size_t n_probe = 0, std::uint64_t seed = 1, double threshold = 1e-6);

/// Ratio of the smallest to the largest singular value after unit-RMS column scaling.
double min_singular_ratio(const std::vector<double>& rows, std::size_t n_rows, std::size_t n_cols);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// 0 when only two points are given.
  double stderr_slope = 0.0;
  std::vector<std::pair<double, double>> points;  ///< (log n, log loss)
};

/// OLS of log(loss) on log(n). Needs at least two points, all positive.
SlopeFit loglog_fit(const std::vector<std::pair<double, double>>& points);

}  // namespace moe
