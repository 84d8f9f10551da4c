#include "moelab/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "moelab/analysis.hpp"
#include "moelab/errors.hpp"
#include "moelab/rng.hpp"
#include "moelab/simd/kernels.hpp"

namespace moe {

namespace {

double sq_dist(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - v[i]) * (u[i] - v[i]);
  return s;
}

double norm_diff(std::span<const double> u, std::span<const double> v) { return std::sqrt(sq_dist(u, v)); }

void check_same_dim(const MixingMeasure& g, const MixingMeasure& h) {
  if (g.dim() != h.dim()) throw ArgumentError("measures have different covariate dimensions");
}

/// Expert means at x and the gate weights, for the quadrature loops.
struct Slice {
  Vec weights;
  Vec means;
  Vec vars;
};

Slice slice_at(const MixingMeasure& g, std::span<const double> x) {
  Slice s;
  s.weights = gate_weights(g, x);
  for (const Atom& a : g.atoms()) {
    double m = a.b;
    for (std::size_t u = 0; u < x.size(); ++u) m += a.a[u] * x[u];
    s.means.push_back(m);
    s.vars.push_back(a.nu);
  }
  return s;
}

struct Grid {
  Vec y;
  Vec w;  // Simpson weights
};

Grid simpson_grid(std::initializer_list<const Slice*> slices) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double s = 0.0;
  for (const Slice* sl : slices) {
    for (std::size_t j = 0; j < sl->means.size(); ++j) {
      lo = std::min(lo, sl->means[j]);
      hi = std::max(hi, sl->means[j]);
      s = std::max(s, std::sqrt(sl->vars[j]));
    }
  }
  lo -= 10.0 * s;
  hi += 10.0 * s;
  const std::size_t m = kQuadratureNodes;
  const double h = (hi - lo) / static_cast<double>(m - 1);
  Grid g;
  g.y.resize(m);
  g.w.resize(m);
  for (std::size_t q = 0; q < m; ++q) {
    g.y[q] = lo + h * static_cast<double>(q);
    const double c = (q == 0 || q == m - 1) ? 1.0 : (q % 2 == 1 ? 4.0 : 2.0);
    g.w[q] = c * h / 3.0;
  }
  return g;
}

Vec density_on(const Slice& s, const Grid& grid, const simd::KernelTable& kern) {
  Vec out(grid.y.size(), 0.0);
  for (std::size_t j = 0; j < s.means.size(); ++j)
    kern.accumulate_gaussian_pdf(grid.y.data(), grid.y.size(), s.means[j], s.vars[j], s.weights[j], out.data());
  return out;
}

template <class Integrand>
double integrate_pair(const MixingMeasure& g1, const MixingMeasure& g2, std::span<const double> x, Integrand f) {
  const auto& kern = simd::active_kernels();
  const Slice s1 = slice_at(g1, x);
  const Slice s2 = slice_at(g2, x);
  const Grid grid = simpson_grid({&s1, &s2});
  const Vec p = density_on(s1, grid, kern);
  const Vec q = density_on(s2, grid, kern);
  double acc = 0.0;
  for (std::size_t i = 0; i < grid.y.size(); ++i) acc += grid.w[i] * f(p[i], q[i]);
  return acc;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

template <class PerX>
MeanSe monte_carlo(std::size_t d, std::size_t n_mc, std::uint64_t seed, PerX per_x) {
  if (n_mc < 2) throw ArgumentError("Monte Carlo estimate needs n_mc >= 2");
  Philox rng(seed, 0);
  Vec x(d);
  Vec vals(n_mc);
  for (std::size_t t = 0; t < n_mc; ++t) {
    for (double& v : x) v = rng.normal();
    vals[t] = per_x(x);
  }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(n_mc);
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n_mc - 1));
  return {mean, sd / std::sqrt(static_cast<double>(n_mc))};
}

std::string format_r(double r) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, r);
  return std::string(buf, res.ptr);
}

}  // namespace

VoronoiAssignment voronoi_assign(const MixingMeasure& g, const MixingMeasure& gstar) {
  check_same_dim(g, gstar);
  VoronoiAssignment out;
  const std::size_t k = g.size();
  const std::size_t ks = gstar.size();
  out.cells.assign(ks, {});
  out.owner.assign(k, 0);
  out.distances.assign(k, Vec(ks, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    const Atom& a = g.atom(i);
    std::size_t best = 0;
    for (std::size_t j = 0; j < ks; ++j) {
      const Atom& s = gstar.atom(j);
      const double dt = g.tau() - gstar.tau();
      const double d2 = sq_dist(a.beta1, s.beta1) + dt * dt + sq_dist(a.a, s.a) + (a.b - s.b) * (a.b - s.b) +
                        (a.nu - s.nu) * (a.nu - s.nu);
      out.distances[i][j] = std::sqrt(d2);
      if (out.distances[i][j] < out.distances[i][best]) best = j;
    }
    out.owner[i] = best;
    out.cells[best].push_back(i);
  }
  return out;
}

ParamDelta param_delta(const Atom& fitted, double tau, const Atom& truth, double tau_star) {
  return {norm_diff(fitted.beta1, truth.beta1), std::abs(tau - tau_star), norm_diff(fitted.a, truth.a),
          std::abs(fitted.b - truth.b), std::abs(fitted.nu - truth.nu)};
}

double kij(const ParamDelta& d, const Kappas& k) {
  for (double v : k)
    if (!(v >= 0.0)) throw ArgumentError("kij exponents must be nonnegative");
  return std::pow(d.beta1, k[0]) + std::pow(d.tau, k[1]) + std::pow(d.a, k[2]) + std::pow(d.b, k[3]) +
         std::pow(d.nu, k[4]);
}

LossKind LossKind::d1(double r) {
  if (!(r >= 1.0)) throw ArgumentError("D1 exponent r must be >= 1");
  return {Family::D1, r};
}

LossKind LossKind::d3(double r) {
  if (!(r >= 1.0)) throw ArgumentError("D3 exponent r must be >= 1");
  return {Family::D3, r};
}

LossKind LossKind::parse(const std::string& text) {
  if (text.size() < 2 || (text[0] != 'D' && text[0] != 'd') || text[1] < '1' || text[1] > '6')
    throw ArgumentError("unknown loss kind '" + text + "'");
  const int idx = text[1] - '0';
  double r = 1.0;
  if (text.size() > 2) {
    if (text[2] != '(' || text.back() != ')' || (idx != 1 && idx != 3))
      throw ArgumentError("unknown loss kind '" + text + "'");
    const char* first = text.data() + 3;
    const char* last = text.data() + text.size() - 1;
    auto res = std::from_chars(first, last, r);
    if (res.ec != std::errc() || res.ptr != last) throw ArgumentError("bad exponent in loss kind '" + text + "'");
  }
  switch (idx) {
    case 1: return d1(r);
    case 2: return d2();
    case 3: return d3(r);
    case 4: return d4();
    case 5: return d5();
    default: return d6();
  }
}

std::string LossKind::label() const {
  switch (family) {
    case Family::D1: return "D1(" + format_r(r) + ")";
    case Family::D2: return "D2";
    case Family::D3: return "D3(" + format_r(r) + ")";
    case Family::D4: return "D4";
    case Family::D5: return "D5";
    case Family::D6: return "D6";
  }
  return "?";
}

LossReport eval_loss(const LossKind& kind, const MixingMeasure& g, const MixingMeasure& gstar) {
  LossReport rep;
  rep.kind = kind;
  rep.assignment = voronoi_assign(g, gstar);
  const std::size_t ks = gstar.size();
  rep.per_cell.resize(ks);
  using F = LossKind::Family;
  for (std::size_t j = 0; j < ks; ++j) {
    const auto& cell = rep.assignment.cells[j];
    CellTerm& term = rep.per_cell[j];
    double mass = 0.0;
    for (std::size_t i : cell) mass += g.atom_weight(i);
    term.weight_discrepancy = std::abs(mass - gstar.atom_weight(j));
    if (cell.empty()) {
      term.empty = true;
      ++rep.empty_cells;
      continue;
    }
    const bool multi = cell.size() > 1;
    int rbar = 0;
    if (multi && (kind.family == F::D4 || kind.family == F::D6)) rbar = rbar_known(static_cast<int>(cell.size()));
    for (std::size_t i : cell) {
      const ParamDelta d = param_delta(g.atom(i), g.tau(), gstar.atom(j), gstar.tau());
      double p = 0.0;
      switch (kind.family) {
        case F::D1:
        case F::D3: p = kij(d, {kind.r, kind.r, kind.r, kind.r, kind.r}); break;
        case F::D2: p = d.a + d.b + d.nu; break;
        case F::D4:
          p = multi ? std::pow(d.b, rbar) + std::pow(d.nu, 0.5 * rbar) : d.b + d.nu;
          break;
        case F::D5: p = kij(d, {1, 1, 1, 1, 1}); break;
        case F::D6:
          p = multi ? kij(d, {2, 2, 2, static_cast<double>(rbar), 0.5 * rbar}) : kij(d, {1, 1, 1, 1, 1});
          break;
      }
      term.parameter_term += g.atom_weight(i) * p;
    }
  }
  for (const CellTerm& t : rep.per_cell) rep.value += t.weight_discrepancy + t.parameter_term;
  return rep;
}

double tv_at(const MixingMeasure& g1, const MixingMeasure& g2, std::span<const double> x) {
  return 0.5 * integrate_pair(g1, g2, x, [](double p, double q) { return std::abs(p - q); });
}

double hellinger_sq_at(const MixingMeasure& g1, const MixingMeasure& g2, std::span<const double> x) {
  return 0.5 * integrate_pair(g1, g2, x, [](double p, double q) {
           const double d = std::sqrt(p) - std::sqrt(q);
           return d * d;
         });
}

double density_mass_at(const MixingMeasure& g, std::span<const double> x) {
  return integrate_pair(g, g, x, [](double p, double) { return p; });
}

McEstimate tv_distance(const MixingMeasure& g1, const MixingMeasure& g2, std::size_t n_mc, std::uint64_t seed) {
  check_same_dim(g1, g2);
  const MeanSe r = monte_carlo(g1.dim(), n_mc, seed, [&](const Vec& x) { return tv_at(g1, g2, x); });
  return {r.mean, r.se, n_mc};
}

McEstimate hellinger_distance(const MixingMeasure& g1, const MixingMeasure& g2, std::size_t n_mc,
                              std::uint64_t seed) {
  check_same_dim(g1, g2);
  const MeanSe r = monte_carlo(g1.dim(), n_mc, seed, [&](const Vec& x) { return hellinger_sq_at(g1, g2, x); });
  const double h = std::sqrt(std::max(0.0, r.mean));
  const double se = h > 0.0 ? r.se / (2.0 * h) : std::sqrt(r.se);
  return {h, se, n_mc};
}

}  // namespace moe
