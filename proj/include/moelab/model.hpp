#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "moelab/activation.hpp"
#include "moelab/dataset.hpp"

namespace moe {

using Vec = std::vector<double>;

/// Gating family: the linear dense-to-sparse gate, or the activated variant
/// whose score is act(beta1'x) instead of beta1'x.
class GateSpec {
 public:
  enum class Kind { Linear, Activated };

  static GateSpec linear() { return GateSpec(Kind::Linear, Activation::identity()); }
  static GateSpec activated(Activation act) { return GateSpec(Kind::Activated, act); }

  Kind kind() const { return kind_; }
  bool is_linear() const { return kind_ == Kind::Linear; }
  /// Only meaningful for Activated gates.
  const Activation& activation() const { return act_; }

  /// Gate score before bias and temperature: s for Linear, act(s) for Activated.
  double score(double s) const { return is_linear() ? s : act_.value(s); }
  double score_d1(double s) const { return is_linear() ? 1.0 : act_.d1(s); }
  double score_d2(double s) const { return is_linear() ? 0.0 : act_.d2(s); }

  std::string label() const { return is_linear() ? "linear" : act_.label(); }

  friend bool operator==(const GateSpec&, const GateSpec&) = default;

 private:
  GateSpec(Kind kind, Activation act) : kind_(kind), act_(act) {}
  Kind kind_;
  Activation act_;
};

/// One expert: gating bias/slope and a linear-Gaussian regression y ~ N(a'x + b, nu).
struct Atom {
  double beta0 = 0.0;
  Vec beta1;
  Vec a;
  double b = 0.0;
  double nu = 1.0;

  friend bool operator==(const Atom&, const Atom&) = default;
};

inline constexpr double kDefaultWeightCap = 50.0;

/// Ordered experts sharing one softmax temperature. Immutable after construction.
///
/// The atom weight exp(beta0/tau) enters the Voronoi losses un-normalized, so
/// construction rejects |beta0/tau| above `weight_cap` instead of clipping it.
/// With `pinned` set, the last atom must carry the identifiability convention
/// beta1 = 0, beta0 = 0.
class MixingMeasure {
 public:
  MixingMeasure(std::vector<Atom> atoms, double tau, GateSpec gate, bool pinned = false,
                double weight_cap = kDefaultWeightCap);

  std::size_t size() const { return atoms_.size(); }
  std::size_t dim() const { return d_; }
  double tau() const { return tau_; }
  const GateSpec& gate() const { return gate_; }
  bool pinned() const { return pinned_; }
  double weight_cap() const { return weight_cap_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const Atom& atom(std::size_t i) const { return atoms_[i]; }

  /// exp(beta0_i / tau), the mass this atom carries in the mixing measure.
  double atom_weight(std::size_t i) const;

  MixingMeasure with_gate(GateSpec gate) const;
  MixingMeasure with_pinned(bool pinned) const;

  friend bool operator==(const MixingMeasure&, const MixingMeasure&) = default;

 private:
  std::vector<Atom> atoms_;
  double tau_;
  GateSpec gate_;
  bool pinned_;
  double weight_cap_;
  std::size_t d_ = 0;
};

/// True iff every atom satisfies the weight cap (useful before constructing).
bool within_weight_cap(std::span<const Atom> atoms, double tau, double cap = kDefaultWeightCap);

/// Pre-softmax scores (gate(beta1_i'x) + beta0_i) / tau.
Vec gate_logits(const MixingMeasure& g, std::span<const double> x);
/// Softmax of gate_logits with max subtraction.
Vec gate_weights(const MixingMeasure& g, std::span<const double> x);

double normal_pdf(double y, double mean, double var);
double normal_logpdf(double y, double mean, double var);

/// Conditional density g_G(y | x) = sum_i w_i(x) N(y | a_i'x + b_i, nu_i).
double conditional_density(const MixingMeasure& g, std::span<const double> x, double y);
/// log g_G(y | x) via log-sum-exp over experts.
double log_conditional_density(const MixingMeasure& g, std::span<const double> x, double y);

/// Mean log conditional density. Returns -inf (never NaN) when some point has
/// zero density in floating point.
double log_likelihood(const MixingMeasure& g, const Dataset& data);

/// beta1_i <- lambda beta1_i, tau <- lambda tau, beta0_i <- lambda beta0_i.
/// Atom weights exp(beta0/tau) and, for the linear gate, the conditional density
/// are unchanged.
MixingMeasure scale_measure(const MixingMeasure& g, double lambda);

/// First partials of the gate numerator F(y|x, w) = exp(gate(beta1'x)/tau) f(y | a'x+b, nu).
struct NumeratorPartials {
  double value = 0.0;
  Vec d_beta1;
  double d_tau = 0.0;
  Vec d_a;
  double d_b = 0.0;
  double d_nu = 0.0;
  /// Mixed second partial d2F / (dtau db).
  double d_tau_b = 0.0;
};

NumeratorPartials numerator_partials(const Atom& atom, double tau, const GateSpec& gate,
                                     std::span<const double> x, double y);

/// Linear-gate partials in closed form (Hermite polynomials for the Gaussian
/// mean derivatives, heat equation for the variance derivative).
inline NumeratorPartials f_partials_linear(const Atom& atom, double tau, std::span<const double> x, double y) {
  return numerator_partials(atom, tau, GateSpec::linear(), x, y);
}

/// dF/dtau + (1/tau) beta1' dF/dbeta1. Identically zero for the linear gate.
double pde1_residual(const Atom& atom, double tau, const GateSpec& gate, std::span<const double> x, double y);
/// d2F/(dtau db) + (1/tau^2) beta1' dF/da. Identically zero for the linear gate.
double pde2_residual(const Atom& atom, double tau, const GateSpec& gate, std::span<const double> x, double y);

inline double pde1_residual(const Atom& atom, double tau, std::span<const double> x, double y) {
  return pde1_residual(atom, tau, GateSpec::linear(), x, y);
}
inline double pde2_residual(const Atom& atom, double tau, std::span<const double> x, double y) {
  return pde2_residual(atom, tau, GateSpec::linear(), x, y);
}

}  // namespace moe
