#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "moelab/model.hpp"

namespace moe {

/// Nearest-true-component partition of a fitted measure's atoms.
struct VoronoiAssignment {
  /// cells[j] lists fitted atom indices closest to true component j (ascending).
  std::vector<std::vector<std::size_t>> cells;
  /// owner[i] is the cell of fitted atom i.
  std::vector<std::size_t> owner;
  /// distances[i][j] = ||omega_i - omega*_j|| with omega = (beta1, tau, a, b, nu).
  std::vector<std::vector<double>> distances;
};

/// Ties go to the lowest true index.
VoronoiAssignment voronoi_assign(const MixingMeasure& g, const MixingMeasure& gstar);

/// Norms of the parameter differences between a fitted atom and a true component.
struct ParamDelta {
  double beta1 = 0.0;
  double tau = 0.0;
  double a = 0.0;
  double b = 0.0;
  double nu = 0.0;
};

ParamDelta param_delta(const Atom& fitted, double tau, const Atom& truth, double tau_star);

using Kappas = std::array<double, 5>;

/// ||dbeta1||^k1 + |dtau|^k2 + ||da||^k3 + |db|^k4 + |dnu|^k5
double kij(const ParamDelta& delta, const Kappas& kappas);

struct LossKind {
  enum class Family { D1, D2, D3, D4, D5, D6 };
  Family family = Family::D2;
  /// Exponent for D1 and D3; ignored otherwise.
  double r = 1.0;

  static LossKind d1(double r);
  static LossKind d2() { return {Family::D2, 1.0}; }
  static LossKind d3(double r);
  static LossKind d4() { return {Family::D4, 1.0}; }
  static LossKind d5() { return {Family::D5, 1.0}; }
  static LossKind d6() { return {Family::D6, 1.0}; }

  /// Accepts "D2", "D4", "D1(2)", "D3(1.5)"; "D1"/"D3" default to r = 1.
  static LossKind parse(const std::string& text);
  std::string label() const;

  friend bool operator==(const LossKind&, const LossKind&) = default;
};

struct CellTerm {
  double weight_discrepancy = 0.0;
  double parameter_term = 0.0;
  /// No fitted atom landed in this cell; only the weight term contributes.
  bool empty = false;
};

struct LossReport {
  LossKind kind;
  double value = 0.0;
  VoronoiAssignment assignment;
  std::vector<CellTerm> per_cell;
  std::size_t empty_cells = 0;
};

/// Throws UnsupportedError when D4/D6 meet a cell with four or more atoms.
LossReport eval_loss(const LossKind& kind, const MixingMeasure& g, const MixingMeasure& gstar);

/// Monte Carlo estimate over X ~ N(0, I).
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_mc = 0;
};

/// Simpson nodes used by the inner integrals over y.
inline constexpr std::size_t kQuadratureNodes = 2001;

/// Inner integrals at one covariate value.
double tv_at(const MixingMeasure& g1, const MixingMeasure& g2, std::span<const double> x);
/// 0.5 * int (sqrt g1 - sqrt g2)^2 dy, i.e. the squared Hellinger distance.
double hellinger_sq_at(const MixingMeasure& g1, const MixingMeasure& g2, std::span<const double> x);
/// Integral of g(y | x) over the same grid (normalization check).
double density_mass_at(const MixingMeasure& g, std::span<const double> x);

McEstimate tv_distance(const MixingMeasure& g1, const MixingMeasure& g2, std::size_t n_mc, std::uint64_t seed);
/// Square root of the averaged squared distance; stderr by the delta method.
McEstimate hellinger_distance(const MixingMeasure& g1, const MixingMeasure& g2, std::size_t n_mc,
                              std::uint64_t seed);

}  // namespace moe
