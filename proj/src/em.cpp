#include "moelab/em.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "moelab/batch.hpp"
#include "moelab/errors.hpp"

namespace moe {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNewtonGainFloor = 1e-14;

/// Cholesky solve that refuses near-singular systems (smallest pivot below
/// rel_tol times the largest diagonal entry).
bool try_cholesky_solve(const MatrixXd& a, const VectorXd& rhs, VectorXd& out, double rel_tol) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return false;
  const MatrixXd l = llt.matrixL();
  const double max_diag = a.diagonal().cwiseAbs().maxCoeff();
  const double min_pivot = l.diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot * min_pivot > rel_tol * max_diag)) return false;
  out = llt.solve(rhs);
  return out.allFinite();
}

GatingState state_from(const MixingMeasure& g) {
  GatingState s;
  s.tau = g.tau();
  for (const Atom& a : g.atoms()) {
    s.beta1.push_back(a.beta1);
    s.beta0.push_back(a.beta0);
  }
  return s;
}

GateParams params_from(const GatingState& s, const GateSpec& gate) {
  GateParams p;
  p.beta0 = s.beta0;
  p.beta1 = s.beta1;
  p.tau = s.tau;
  p.gate = gate;
  return p;
}

/// Per-point row sums of the responsibility matrix.
std::vector<double> row_mass(std::span<const double> resp, std::size_t k, std::size_t n) {
  std::vector<double> rho(n, 0.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < n; ++i) rho[i] += resp[j * n + i];
  return rho;
}

/// Coordinates the gating block is differentiated in.
///
/// Theta is (beta1_j, beta0_j, tau) as stored. Natural removes the 1/tau
/// nonlinearity: for the linear gate (beta1_j/tau, beta0_j/tau) with tau held
/// (it is not identified by the gating objective), for activated gates
/// (beta1_j, beta0_j/tau, 1/tau). The linear-gate objective is concave in its
/// natural coordinates, so Fisher scoring there is exact Newton.
enum class Coords { Theta, Natural };

/// Per-point derivative arrays at one gating point.
struct GatingDerivatives {
  std::size_t n = 0, k = 0, d = 0, free = 0;
  bool has_scale = true;      // trailing tau (Theta) or 1/tau (Natural) coordinate
  bool second_order = false;  // curvature correction available (Natural, activated)
  GateBatch batch;
  std::vector<double> pi;     // k x n gate weights
  std::vector<double> slope;  // k x n dz/d(beta1'x)
  std::vector<double> t;      // k x n dz/d(scale coordinate)
  std::vector<double> sd1;    // k x n gate'(pre)       (second_order only)
  std::vector<double> sd2;    // k x n gate''(pre)      (second_order only)
  std::vector<double> rho;    // n
  double jac_scale = 1.0;     // factor on the slope and bias blocks
  double psi = 1.0;           // 1/tau

  void compute(const GatingState& s, const GateSpec& gate, bool pinned, const Dataset& data,
               std::span<const double> resp, Coords coords, bool paper_gradient, const simd::KernelTable& kern) {
    n = data.size();
    k = s.beta0.size();
    d = data.dim();
    free = pinned ? k - 1 : k;
    psi = 1.0 / s.tau;
    batch.compute(params_from(s, gate), data, kern);
    pi.resize(k * n);
    slope.resize(k * n);
    t.resize(k * n);
    for (std::size_t j = 0; j < k; ++j) kern.exp_shifted(&batch.logits[j * n], batch.lse.data(), n, &pi[j * n]);
    rho = row_mass(resp, k, n);
    const bool linear = gate.is_linear();
    if (coords == Coords::Theta) {
      has_scale = true;
      second_order = false;
      jac_scale = paper_gradient ? 1.0 : psi;
      for (std::size_t q = 0; q < k * n; ++q) {
        slope[q] = gate.score_d1(batch.pre[q]);
        t[q] = -batch.logits[q] * psi;
      }
      return;
    }
    jac_scale = 1.0;
    has_scale = !linear;
    second_order = !linear;
    if (linear) {
      std::fill(slope.begin(), slope.end(), 1.0);
      std::fill(t.begin(), t.end(), 0.0);
      return;
    }
    sd1.resize(k * n);
    sd2.resize(k * n);
    for (std::size_t q = 0; q < k * n; ++q) {
      const double pre = batch.pre[q];
      sd1[q] = gate.score_d1(pre);
      sd2[q] = gate.score_d2(pre);
      slope[q] = psi * sd1[q];
      t[q] = gate.score(pre);
    }
  }

  std::size_t block() const { return d + 1; }
  std::size_t dim() const { return free * block() + (has_scale ? 1 : 0); }
};

std::vector<double> deltas(const GatingDerivatives& g, std::span<const double> resp) {
  std::vector<double> delta(g.k * g.n);
  for (std::size_t j = 0; j < g.k; ++j)
    for (std::size_t i = 0; i < g.n; ++i) delta[j * g.n + i] = resp[j * g.n + i] - g.rho[i] * g.pi[j * g.n + i];
  return delta;
}

VectorXd assemble_gradient(const GatingDerivatives& g, std::span<const double> resp, const Dataset& data,
                           const simd::KernelTable& kern) {
  const std::size_t n = g.n;
  const double inv_n = 1.0 / static_cast<double>(n);
  VectorXd e = VectorXd::Zero(static_cast<Eigen::Index>(g.dim()));
  const std::vector<double> delta = deltas(g, resp);
  std::vector<double> scaled(n);
  double e_scale = 0.0;
  for (std::size_t j = 0; j < g.k; ++j) {
    const double* dj = &delta[j * n];
    if (g.has_scale) e_scale += kern.dot(dj, &g.t[j * n], n);
    if (j >= g.free) continue;
    for (std::size_t i = 0; i < n; ++i) scaled[i] = dj[i] * g.slope[j * n + i];
    const std::size_t base = j * g.block();
    for (std::size_t u = 0; u < g.d; ++u)
      e[static_cast<Eigen::Index>(base + u)] = g.jac_scale * inv_n * kern.dot(scaled.data(), data.column(u).data(), n);
    e[static_cast<Eigen::Index>(base + g.d)] = g.jac_scale * inv_n * kern.sum(dj, n);
  }
  if (g.has_scale) e[static_cast<Eigen::Index>(g.dim() - 1)] = inv_n * e_scale;
  return e;
}

/// dz_j / d(coordinate u of atom j), one n-array per free (atom, coordinate).
std::vector<std::vector<double>> block_features(const GatingDerivatives& g, const Dataset& data) {
  const std::size_t n = g.n;
  std::vector<std::vector<double>> f(g.free * g.block(), std::vector<double>(n));
  for (std::size_t j = 0; j < g.free; ++j) {
    for (std::size_t u = 0; u < g.d; ++u) {
      const double* xu = data.column(u).data();
      double* out = f[j * g.block() + u].data();
      for (std::size_t i = 0; i < n; ++i) out[i] = g.jac_scale * g.slope[j * n + i] * xu[i];
    }
    std::fill(f[j * g.block() + g.d].begin(), f[j * g.block() + g.d].end(), g.jac_scale);
  }
  return f;
}

/// Expected information sum_i rho_i J_i'(diag(pi_i) - pi_i pi_i')J_i / n.
MatrixXd assemble_fisher(const GatingDerivatives& g, const Dataset& data, const simd::KernelTable& kern) {
  const std::size_t n = g.n;
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t bs = g.block();
  const Eigen::Index p = static_cast<Eigen::Index>(g.dim());
  MatrixXd r = MatrixXd::Zero(p, p);
  const auto f = block_features(g, data);

  std::vector<double> w(n);
  for (std::size_t j = 0; j < g.free; ++j) {
    for (std::size_t l = j; l < g.free; ++l) {
      for (std::size_t i = 0; i < n; ++i) {
        const double pij = g.pi[j * n + i];
        w[i] = g.rho[i] * pij * ((j == l ? 1.0 : 0.0) - g.pi[l * n + i]);
      }
      for (std::size_t u = 0; u < bs; ++u) {
        for (std::size_t v = (j == l ? u : 0); v < bs; ++v) {
          const double val = inv_n * kern.weighted_dot(w.data(), f[j * bs + u].data(), f[l * bs + v].data(), n);
          const Eigen::Index a = static_cast<Eigen::Index>(j * bs + u);
          const Eigen::Index b = static_cast<Eigen::Index>(l * bs + v);
          r(a, b) = val;
          r(b, a) = val;
        }
      }
    }
  }
  if (!g.has_scale) return r;

  std::vector<double> tbar(n, 0.0);
  for (std::size_t j = 0; j < g.k; ++j)
    for (std::size_t i = 0; i < n; ++i) tbar[i] += g.pi[j * n + i] * g.t[j * n + i];
  for (std::size_t j = 0; j < g.free; ++j) {
    for (std::size_t i = 0; i < n; ++i) w[i] = g.rho[i] * g.pi[j * n + i] * (g.t[j * n + i] - tbar[i]);
    for (std::size_t u = 0; u < bs; ++u) {
      const double val = inv_n * kern.dot(w.data(), f[j * bs + u].data(), n);
      r(static_cast<Eigen::Index>(j * bs + u), p - 1) = val;
      r(p - 1, static_cast<Eigen::Index>(j * bs + u)) = val;
    }
  }
  double rtt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s2 = 0.0;
    for (std::size_t j = 0; j < g.k; ++j) s2 += g.pi[j * n + i] * g.t[j * n + i] * g.t[j * n + i];
    rtt += g.rho[i] * (s2 - tbar[i] * tbar[i]);
  }
  r(p - 1, p - 1) = inv_n * rtt;
  return r;
}

/// Observed-minus-expected part of the negative Hessian in natural
/// coordinates of an activated gate: sum_i delta_ij d2 z_ij / n.
MatrixXd assemble_curvature(const GatingDerivatives& g, std::span<const double> resp, const Dataset& data,
                            const simd::KernelTable& kern) {
  const std::size_t n = g.n;
  const double inv_n = 1.0 / static_cast<double>(n);
  const std::size_t bs = g.block();
  const Eigen::Index p = static_cast<Eigen::Index>(g.dim());
  MatrixXd s = MatrixXd::Zero(p, p);
  if (!g.second_order) return s;
  const std::vector<double> delta = deltas(g, resp);
  std::vector<double> w(n);
  for (std::size_t j = 0; j < g.free; ++j) {
    for (std::size_t i = 0; i < n; ++i) w[i] = delta[j * n + i] * g.psi * g.sd2[j * n + i];
    for (std::size_t u = 0; u < g.d; ++u) {
      for (std::size_t v = u; v < g.d; ++v) {
        const double val = inv_n * kern.weighted_dot(w.data(), data.column(u).data(), data.column(v).data(), n);
        s(static_cast<Eigen::Index>(j * bs + u), static_cast<Eigen::Index>(j * bs + v)) = val;
        s(static_cast<Eigen::Index>(j * bs + v), static_cast<Eigen::Index>(j * bs + u)) = val;
      }
    }
    for (std::size_t i = 0; i < n; ++i) w[i] = delta[j * n + i] * g.sd1[j * n + i];
    for (std::size_t u = 0; u < g.d; ++u) {
      const double val = inv_n * kern.dot(w.data(), data.column(u).data(), n);
      s(static_cast<Eigen::Index>(j * bs + u), p - 1) = val;
      s(p - 1, static_cast<Eigen::Index>(j * bs + u)) = val;
    }
  }
  return s;
}

/// Moves cur by step * dir given in the coordinates g was computed in.
/// Returns false when the scale leaves its domain.
bool apply_step(const GatingState& cur, const VectorXd& dir, double step, const GatingDerivatives& g, Coords coords,
                bool linear, double tau_min, GatingState& out) {
  out = cur;
  const std::size_t bs = g.block();
  auto at = [&](std::size_t idx) { return step * dir[static_cast<Eigen::Index>(idx)]; };
  if (coords == Coords::Theta) {
    for (std::size_t j = 0; j < g.free; ++j) {
      for (std::size_t u = 0; u < g.d; ++u) out.beta1[j][u] += at(j * bs + u);
      out.beta0[j] += at(j * bs + g.d);
    }
    out.tau = std::max(tau_min, cur.tau + at(g.dim() - 1));
    return std::isfinite(out.tau);
  }
  if (linear) {
    // tau is held; slope and bias move as beta / tau.
    for (std::size_t j = 0; j < g.free; ++j) {
      for (std::size_t u = 0; u < g.d; ++u) out.beta1[j][u] += cur.tau * at(j * bs + u);
      out.beta0[j] += cur.tau * at(j * bs + g.d);
    }
    return true;
  }
  const double psi = 1.0 / cur.tau + at(g.dim() - 1);
  if (!(psi > 0.0) || !std::isfinite(psi)) return false;
  out.tau = std::max(tau_min, 1.0 / psi);
  for (std::size_t j = 0; j < g.k; ++j) {
    const double gamma0 = cur.beta0[j] / cur.tau + (j < g.free ? at(j * bs + g.d) : 0.0);
    out.beta0[j] = gamma0 * out.tau;
    if (j < g.free)
      for (std::size_t u = 0; u < g.d; ++u) out.beta1[j][u] += at(j * bs + u);
  }
  return true;
}

bool state_within_cap(const GatingState& s) {
  for (double b0 : s.beta0)
    if (!(std::abs(b0 / s.tau) <= kDefaultWeightCap)) return false;
  for (const Vec& b1 : s.beta1)
    for (double v : b1)
      if (!std::isfinite(v)) return false;
  return std::isfinite(s.tau);
}

void check_resp(std::span<const double> resp, std::size_t k, std::size_t n) {
  if (resp.size() != k * n)
    throw ArgumentError("responsibility matrix has " + std::to_string(resp.size()) + " entries, expected " +
                        std::to_string(k * n));
}

}  // namespace

EStepResult e_step(const MixingMeasure& g, const Dataset& data, const simd::KernelTable& kern) {
  if (data.dim() != g.dim()) throw ArgumentError("dataset and measure dimensions differ");
  BatchWorkspace ws(kern);
  ws.evaluate(g, data);
  EStepResult r;
  r.n = data.size();
  r.k = g.size();
  r.underflow_rows = ws.responsibilities(r.resp);
  r.mean_loglik = data.empty() ? 0.0 : ws.mean_loglik();
  return r;
}

ExpertUpdate m_step_experts(const Dataset& data, std::span<const double> resp, std::size_t k, double nu_min,
                            const simd::KernelTable& kern) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  check_resp(resp, k, n);
  const std::size_t bs = d + 1;
  const double* y = data.y().data();
  ExpertUpdate out;
  out.a.assign(k, Vec(d, 0.0));
  out.b.assign(k, 0.0);
  out.nu.assign(k, nu_min);
  out.ridge.assign(k, false);
  std::vector<double> mean(n), resid(n);
  for (std::size_t j = 0; j < k; ++j) {
    const double* w = resp.data() + j * n;
    const double mass = kern.sum(w, n);
    MatrixXd a(bs, bs);
    VectorXd rhs(bs);
    for (std::size_t u = 0; u < d; ++u) {
      const double* xu = data.column(u).data();
      for (std::size_t v = u; v < d; ++v) {
        const double val = kern.weighted_dot(w, xu, data.column(v).data(), n);
        a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) = val;
        a(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(u)) = val;
      }
      const double sx = kern.dot(w, xu, n);
      a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(d)) = sx;
      a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(u)) = sx;
      rhs[static_cast<Eigen::Index>(u)] = kern.weighted_dot(w, y, xu, n);
    }
    a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) = mass;
    rhs[static_cast<Eigen::Index>(d)] = kern.dot(w, y, n);

    VectorXd theta;
    if (!try_cholesky_solve(a, rhs, theta, 1e-13)) {
      out.ridge[j] = true;
      theta = (a + 1e-8 * MatrixXd::Identity(bs, bs)).ldlt().solve(rhs);
    }
    for (std::size_t u = 0; u < d; ++u) out.a[j][u] = theta[static_cast<Eigen::Index>(u)];
    out.b[j] = theta[static_cast<Eigen::Index>(d)];

    kern.affine(data.column(0).data(), n, out.a[j], out.b[j], mean.data());
    for (std::size_t i = 0; i < n; ++i) resid[i] = y[i] - mean[i];
    const double nu = mass > 0.0 ? kern.weighted_dot(w, resid.data(), resid.data(), n) / mass : nu_min;
    out.nu[j] = std::max(nu_min, std::isfinite(nu) ? nu : nu_min);
  }
  return out;
}

double gating_objective(const GatingState& s, const GateSpec& gate, const Dataset& data, std::span<const double> resp,
                        const simd::KernelTable& kern) {
  const std::size_t n = data.size();
  const std::size_t k = s.beta0.size();
  check_resp(resp, k, n);
  GateBatch batch;
  batch.compute(params_from(s, gate), data, kern);
  const std::vector<double> rho = row_mass(resp, k, n);
  double q = -kern.dot(rho.data(), batch.lse.data(), n);
  for (std::size_t j = 0; j < k; ++j) q += kern.dot(resp.data() + j * n, &batch.logits[j * n], n);
  return q / static_cast<double>(n);
}

std::vector<double> gating_gradient(const GatingState& s, const GateSpec& gate, bool pinned, const Dataset& data,
                                    std::span<const double> resp, bool paper_gradient, const simd::KernelTable& kern) {
  check_resp(resp, s.beta0.size(), data.size());
  GatingDerivatives g;
  g.compute(s, gate, pinned, data, resp, Coords::Theta, paper_gradient, kern);
  const VectorXd e = assemble_gradient(g, resp, data, kern);
  return {e.data(), e.data() + e.size()};
}

GatingState irls_gating_step(const GatingState& start, const Dataset& data, std::span<const double> resp,
                             const FitConfig& cfg, IrlsReport* report, const simd::KernelTable& kern) {
  const std::size_t k = start.beta0.size();
  check_resp(resp, k, data.size());
  if (cfg.pin_last_atom && k < 1) throw ArgumentError("pinned gating needs at least one atom");
  IrlsReport local;
  IrlsReport& rep = report ? *report : local;
  rep = IrlsReport{};

  GatingState cur = start;
  double q = gating_objective(cur, cfg.gate, data, resp, kern);
  rep.q_before = q;
  rep.q_trace.push_back(q);
  const bool linear = cfg.gate.is_linear();
  const Coords coords = cfg.paper_gradient ? Coords::Theta : Coords::Natural;
  GatingDerivatives g;
  GatingState trial;
  for (int it = 0; it < cfg.irls_iters; ++it) {
    g.compute(cur, cfg.gate, cfg.pin_last_atom, data, resp, coords, cfg.paper_gradient, kern);
    if (g.dim() == 0) break;
    const VectorXd e = assemble_gradient(g, resp, data, kern);
    if (!(e.norm() >= cfg.irls_grad_tol)) break;
    MatrixXd r = assemble_fisher(g, data, kern);
    if (g.second_order) {
      // Newton where the observed curvature is usable, scoring otherwise.
      const MatrixXd h = r - assemble_curvature(g, resp, data, kern);
      VectorXd probe;
      if (try_cholesky_solve(h, e, probe, 1e-12)) r = h;
    }

    VectorXd dir;
    if (!try_cholesky_solve(r, e, dir, 1e-12)) {
      double mu = 1e-6;
      const Eigen::Index p = r.rows();
      while (!try_cholesky_solve(r + mu * MatrixXd::Identity(p, p), e, dir, 1e-14)) {
        mu *= 2.0;
        if (mu > 1e12) break;
      }
      ++rep.damping_events;
      if (mu > 1e12) break;
    }

    // Newton decrement: predicted gain of the full step. Below rounding level
    // of a mean over n points there is nothing left to gain.
    if (!(0.5 * e.dot(dir) > kNewtonGainFloor)) break;

    double step = cfg.irls_step;
    bool accepted = false;
    for (int halving = 0; halving <= 10; ++halving, step *= 0.5) {
      if (!apply_step(cur, dir, step, g, coords, linear, cfg.tau_min, trial)) continue;
      if (!state_within_cap(trial)) {
        ++rep.cap_rejections;
        continue;
      }
      const double q_trial = gating_objective(trial, cfg.gate, data, resp, kern);
      if (q_trial >= q) {
        cur = trial;
        q = q_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      ++rep.steps_rejected;
      break;
    }
    ++rep.steps_taken;
    rep.q_trace.push_back(q);
  }
  rep.q_after = q;
  return cur;
}

std::vector<std::size_t> random_cell_plan(std::size_t k, std::size_t k_star, bool pin_singleton, Philox& rng) {
  if (k_star == 0 || k < k_star) throw ArgumentError("cell plan needs 1 <= k_star <= k");
  const bool singleton = pin_singleton && k_star > 1;
  const std::size_t free_atoms = singleton ? k - 1 : k;
  const std::size_t free_cells = singleton ? k_star - 1 : k_star;
  std::vector<std::size_t> plan(k, k_star - 1);
  std::vector<char> hit(free_cells);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::fill(hit.begin(), hit.end(), 0);
    for (std::size_t j = 0; j < free_atoms; ++j) {
      plan[j] = static_cast<std::size_t>(rng.below(free_cells));
      hit[plan[j]] = 1;
    }
    if (std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; })) return plan;
  }
  // Unreachable in practice for small k; fall back to a shuffled cover.
  for (std::size_t j = 0; j < free_atoms; ++j) plan[j] = j < free_cells ? j : static_cast<std::size_t>(rng.below(free_cells));
  return plan;
}

MixingMeasure init_measure(const InitSpec& spec, std::size_t k, std::size_t d, const GateSpec& gate, bool pinned,
                           Philox& rng, double tau_min, double nu_min) {
  if (k == 0 || d == 0) throw ArgumentError("init_measure needs k >= 1 and d >= 1");
  std::vector<Atom> atoms(k);
  double tau = 0.0;

  if (const auto* nt = std::get_if<NearTruthInit>(&spec)) {
    const MixingMeasure& truth = nt->truth;
    const std::size_t k_star = truth.size();
    if (truth.dim() != d) throw ArgumentError("truth dimension does not match the fit dimension");
    if (k_star > k) throw ArgumentError("near-truth init needs at least as many fitted atoms as true components");
    if (!(nt->jitter_sd >= 0.0)) throw ArgumentError("jitter_sd must be nonnegative");
    std::vector<std::size_t> plan;
    if (nt->cell_plan) {
      plan = *nt->cell_plan;
      if (plan.size() != k) throw ArgumentError("cell plan must assign every fitted atom");
      std::vector<char> hit(k_star, 0);
      for (std::size_t c : plan) {
        if (c >= k_star) throw ArgumentError("cell plan refers to a nonexistent true component");
        hit[c] = 1;
      }
      if (!std::all_of(hit.begin(), hit.end(), [](char h) { return h != 0; }))
        throw ArgumentError("cell plan is not surjective onto the true components");
    } else {
      plan = random_cell_plan(k, k_star, pinned && truth.pinned(), rng);
    }
    const double sd = nt->jitter_sd;
    tau = truth.tau() + sd * rng.normal();
    if (tau < tau_min) tau = tau_min + std::abs(tau - tau_min);
    for (std::size_t j = 0; j < k; ++j) {
      const Atom& src = truth.atom(plan[j]);
      Atom& a = atoms[j];
      a.beta1.resize(d);
      a.a.resize(d);
      do {
        a.beta0 = src.beta0 + sd * rng.normal();
      } while (std::abs(a.beta0 / tau) > kDefaultWeightCap);
      for (std::size_t u = 0; u < d; ++u) a.beta1[u] = src.beta1[u] + sd * rng.normal();
      for (std::size_t u = 0; u < d; ++u) a.a[u] = src.a[u] + sd * rng.normal();
      a.b = src.b + sd * rng.normal();
      a.nu = std::max(nu_min, std::abs(src.nu + sd * rng.normal()));
    }
  } else {
    const double s = std::get<RandomInit>(spec).scale;
    if (!(s > 0.0)) throw ArgumentError("random init scale must be positive");
    tau = std::abs(0.5 + s * rng.normal()) + tau_min;
    for (Atom& a : atoms) {
      a.beta1.resize(d);
      a.a.resize(d);
      do {
        a.beta0 = s * rng.normal();
      } while (std::abs(a.beta0 / tau) > kDefaultWeightCap);
      for (double& v : a.beta1) v = s * rng.normal();
      for (double& v : a.a) v = s * rng.normal();
      a.b = s * rng.normal();
      a.nu = std::abs(s * rng.normal()) + nu_min;
    }
  }
  if (pinned) {
    atoms.back().beta0 = 0.0;
    std::fill(atoms.back().beta1.begin(), atoms.back().beta1.end(), 0.0);
  }
  return MixingMeasure(std::move(atoms), tau, gate, pinned);
}

FitResult em_fit(const Dataset& data, const FitConfig& cfg, const MixingMeasure& init, const simd::KernelTable& kern) {
  if (init.size() != cfg.k) throw ArgumentError("initial measure has " + std::to_string(init.size()) + " atoms, config k = " + std::to_string(cfg.k));
  if (data.dim() != init.dim()) throw ArgumentError("dataset and initial measure dimensions differ");
  if (data.size() < 10 * cfg.k) throw ArgumentError("em_fit needs at least 10*k data points");
  if (cfg.pin_last_atom && !init.pinned()) throw ArgumentError("pin_last_atom requires a pinned initial measure");
  if (!(cfg.em_tol > 0.0) || cfg.irls_iters < 0 || cfg.max_em_iters < 1 || !(cfg.irls_step > 0.0) ||
      !(cfg.tau_min > 0.0) || !(cfg.nu_min > 0.0))
    throw ArgumentError("fit config values must be positive");

  const std::size_t n = data.size();
  const std::size_t k = cfg.k;
  FitConfig gate_cfg = cfg;
  gate_cfg.gate = init.gate();

  FitResult result{init, {}, false, 0};
  MixingMeasure g = init;
  BatchWorkspace ws(kern);
  ws.evaluate(g, data);
  double ll = ws.mean_loglik();
  std::vector<double> resp;
  result.underflow_rows += ws.responsibilities(resp);

  for (int it = 1; it <= cfg.max_em_iters; ++it) {
    result.iters = it;

    // Rescue experts whose responsibility mass vanished: move them onto the
    // worst-explained point.
    bool reseeded = false;
    std::vector<Atom> atoms = g.atoms();
    for (std::size_t j = 0; j < k; ++j) {
      if (kern.sum(resp.data() + j * n, n) >= 1e-10) continue;
      const auto lse = ws.lse_joint();
      const std::size_t worst = static_cast<std::size_t>(std::min_element(lse.begin(), lse.end()) - lse.begin());
      std::fill(atoms[j].a.begin(), atoms[j].a.end(), 0.0);
      atoms[j].b = data.y()[worst];
      atoms[j].nu = std::max(cfg.nu_min, atoms[j].nu);
      ++result.reseeds;
      reseeded = true;
    }
    if (reseeded) {
      g = MixingMeasure(std::move(atoms), g.tau(), g.gate(), g.pinned());
      ws.evaluate(g, data);
      ll = ws.mean_loglik();
      result.underflow_rows += ws.responsibilities(resp);
    }

    const ExpertUpdate ex = m_step_experts(data, resp, k, cfg.nu_min, kern);
    for (bool r : ex.ridge) result.ridge_fallbacks += r ? 1 : 0;
    IrlsReport irls;
    const GatingState gs = irls_gating_step(state_from(g), data, resp, gate_cfg, &irls, kern);
    result.irls_steps += static_cast<std::size_t>(irls.steps_taken);
    result.weight_capped = irls.cap_rejections > 0;

    std::vector<Atom> next(k);
    for (std::size_t j = 0; j < k; ++j) {
      next[j].beta0 = gs.beta0[j];
      next[j].beta1 = gs.beta1[j];
      next[j].a = ex.a[j];
      next[j].b = ex.b[j];
      next[j].nu = ex.nu[j];
    }
    MixingMeasure candidate(std::move(next), gs.tau, g.gate(), g.pinned());
    ws.evaluate(candidate, data);
    const double ll_new = ws.mean_loglik();
    if (!(ll_new >= ll - 1e-9)) {
      // Ascent broke down numerically; keep the last good measure.
      result.stalled = true;
      ws.evaluate(g, data);
      break;
    }
    g = std::move(candidate);
    result.loglik_trace.push_back(ll_new);
    result.underflow_rows += ws.responsibilities(resp);
    const double change = std::abs(ll_new - ll);
    ll = ll_new;
    if (change < cfg.em_tol) {
      result.converged = true;
      break;
    }
  }
  result.measure = g;
  return result;
}

FitResult em_fit(const Dataset& data, const FitConfig& cfg, const InitSpec& spec, Philox& rng) {
  const MixingMeasure init = init_measure(spec, cfg.k, data.dim(), cfg.gate, cfg.pin_last_atom, rng, cfg.tau_min, cfg.nu_min);
  return em_fit(data, cfg, init);
}

}  // namespace moe
