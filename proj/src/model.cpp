#include "moelab/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "moelab/batch.hpp"
#include "moelab/errors.hpp"

namespace moe {

namespace {

double dot(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

void check_dim(const MixingMeasure& g, std::span<const double> x) {
  if (x.size() != g.dim())
    throw ArgumentError("covariate has dimension " + std::to_string(x.size()) + ", measure expects " +
                        std::to_string(g.dim()));
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

}  // namespace

MixingMeasure::MixingMeasure(std::vector<Atom> atoms, double tau, GateSpec gate, bool pinned, double weight_cap)
    : atoms_(std::move(atoms)), tau_(tau), gate_(gate), pinned_(pinned), weight_cap_(weight_cap) {
  if (atoms_.empty()) throw ArgumentError("mixing measure needs at least one atom");
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ArgumentError("temperature must be positive and finite");
  d_ = atoms_.front().beta1.size();
  if (d_ == 0) throw ArgumentError("atoms must have dimension at least 1");
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const Atom& a = atoms_[i];
    const std::string at = "atom " + std::to_string(i) + ": ";
    if (a.beta1.size() != d_ || a.a.size() != d_) throw ArgumentError(at + "beta1 and a must share the measure dimension");
    if (!(a.nu > 0.0) || !std::isfinite(a.nu)) throw ArgumentError(at + "variance nu must be positive and finite");
    bool finite = std::isfinite(a.beta0) && std::isfinite(a.b);
    for (std::size_t u = 0; u < d_; ++u) finite = finite && std::isfinite(a.beta1[u]) && std::isfinite(a.a[u]);
    if (!finite) throw ArgumentError(at + "parameters must be finite");
    if (std::abs(a.beta0 / tau_) > weight_cap_)
      throw ArgumentError(at + "|beta0/tau| = " + std::to_string(std::abs(a.beta0 / tau_)) + " exceeds the weight cap " +
                          std::to_string(weight_cap_));
  }
  if (pinned_) {
    const Atom& last = atoms_.back();
    const bool zero_slope = std::all_of(last.beta1.begin(), last.beta1.end(), [](double v) { return v == 0.0; });
    if (!zero_slope || last.beta0 != 0.0)
      throw ArgumentError("pinned measure requires the last atom to have beta1 = 0 and beta0 = 0");
  }
}

double MixingMeasure::atom_weight(std::size_t i) const { return std::exp(atoms_[i].beta0 / tau_); }

MixingMeasure MixingMeasure::with_gate(GateSpec gate) const {
  return MixingMeasure(atoms_, tau_, gate, pinned_, weight_cap_);
}

MixingMeasure MixingMeasure::with_pinned(bool pinned) const {
  return MixingMeasure(atoms_, tau_, gate_, pinned, weight_cap_);
}

bool within_weight_cap(std::span<const Atom> atoms, double tau, double cap) {
  return std::all_of(atoms.begin(), atoms.end(), [&](const Atom& a) { return std::abs(a.beta0 / tau) <= cap; });
}

Vec gate_logits(const MixingMeasure& g, std::span<const double> x) {
  check_dim(g, x);
  Vec z(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Atom& a = g.atom(i);
    z[i] = (g.gate().score(dot(a.beta1, x)) + a.beta0) / g.tau();
  }
  return z;
}

Vec gate_weights(const MixingMeasure& g, std::span<const double> x) {
  Vec z = gate_logits(g, x);
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : z) v /= s;
  return z;
}

double normal_pdf(double y, double mean, double var) {
  const double r = y - mean;
  return std::exp(-0.5 * r * r / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

double normal_logpdf(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * r * r / var;
}

double conditional_density(const MixingMeasure& g, std::span<const double> x, double y) {
  const Vec w = gate_weights(g, x);
  double p = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Atom& a = g.atom(i);
    p += w[i] * normal_pdf(y, dot(a.a, x) + a.b, a.nu);
  }
  return p;
}

double log_conditional_density(const MixingMeasure& g, std::span<const double> x, double y) {
  Vec terms = gate_logits(g, x);
  const double lse_gate = log_sum_exp(terms);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Atom& a = g.atom(i);
    terms[i] += normal_logpdf(y, dot(a.a, x) + a.b, a.nu) - lse_gate;
  }
  return log_sum_exp(terms);
}

double log_likelihood(const MixingMeasure& g, const Dataset& data) {
  if (data.empty()) throw ArgumentError("log_likelihood needs a nonempty dataset");
  if (data.dim() != g.dim()) throw ArgumentError("dataset and measure dimensions differ");
  BatchWorkspace ws;
  ws.evaluate(g, data);
  return ws.mean_loglik();
}

MixingMeasure scale_measure(const MixingMeasure& g, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ArgumentError("scale factor must be positive (temperature must stay positive)");
  std::vector<Atom> atoms = g.atoms();
  for (Atom& a : atoms) {
    for (double& v : a.beta1) v *= lambda;
    a.beta0 *= lambda;
  }
  return MixingMeasure(std::move(atoms), g.tau() * lambda, g.gate(), g.pinned(), g.weight_cap());
}

NumeratorPartials numerator_partials(const Atom& atom, double tau, const GateSpec& gate, std::span<const double> x,
                                     double y) {
  if (x.size() != atom.beta1.size()) throw ArgumentError("covariate dimension does not match atom");
  if (!(tau > 0.0) || !(atom.nu > 0.0)) throw ArgumentError("tau and nu must be positive");
  const std::size_t d = x.size();
  const double s = dot(atom.beta1, x);
  const double score = gate.score(s);
  const double slope = gate.score_d1(s);
  const double gate_factor = std::exp(score / tau);

  // Gaussian derivatives in the mean: f' = f h1, f'' = f h2 with Hermite
  // polynomials h1 = r/nu, h2 = r^2/nu^2 - 1/nu.
  const double mean = dot(atom.a, x) + atom.b;
  const double f = normal_pdf(y, mean, atom.nu);
  const double r = y - mean;
  const double h1 = r / atom.nu;
  const double h2 = h1 * h1 - 1.0 / atom.nu;

  NumeratorPartials p;
  p.value = gate_factor * f;
  const double f1 = gate_factor * f * h1;
  const double f2 = gate_factor * f * h2;
  p.d_beta1.resize(d);
  p.d_a.resize(d);
  for (std::size_t u = 0; u < d; ++u) {
    p.d_beta1[u] = slope * x[u] / tau * p.value;
    p.d_a[u] = x[u] * f1;
  }
  p.d_tau = -score / (tau * tau) * p.value;
  p.d_b = f1;
  p.d_nu = 0.5 * f2;
  p.d_tau_b = -score / (tau * tau) * f1;
  return p;
}

double pde1_residual(const Atom& atom, double tau, const GateSpec& gate, std::span<const double> x, double y) {
  const NumeratorPartials p = numerator_partials(atom, tau, gate, x, y);
  return p.d_tau + dot(atom.beta1, p.d_beta1) / tau;
}

double pde2_residual(const Atom& atom, double tau, const GateSpec& gate, std::span<const double> x, double y) {
  const NumeratorPartials p = numerator_partials(atom, tau, gate, x, y);
  return p.d_tau_b + dot(atom.beta1, p.d_a) / (tau * tau);
}

}  // namespace moe
