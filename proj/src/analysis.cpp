#include "moelab/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "moelab/errors.hpp"
#include "moelab/rng.hpp"

namespace moe {

namespace {

/// c_s(q1, q2) = sum_{n1 + 2 n2 = s} q1^n1 q2^n2 / (n1! n2!) for s = 0..r.
/// Satisfies dc_s/dq1 = c_{s-1} and dc_s/dq2 = c_{s-2}.
std::vector<double> moment_terms(double q1, double q2, int r) {
  std::vector<double> c(static_cast<std::size_t>(r) + 1, 0.0);
  for (int s = 0; s <= r; ++s) {
    double acc = 0.0;
    for (int n2 = 0; 2 * n2 <= s; ++n2) {
      const int n1 = s - 2 * n2;
      acc += std::pow(q1, n1) * std::pow(q2, n2) / (std::tgamma(n1 + 1.0) * std::tgamma(n2 + 1.0));
    }
    c[static_cast<std::size_t>(s)] = acc;
  }
  return c;
}

void check_system(const PolySystem& sys, std::size_t n_values) {
  if (sys.m < 1 || sys.r < 1) throw ArgumentError("polynomial system needs m >= 1 and r >= 1");
  if (n_values != 3 * static_cast<std::size_t>(sys.m))
    throw ArgumentError("polynomial system with m = " + std::to_string(sys.m) + " needs " + std::to_string(3 * sys.m) +
                        " values");
}

using Eigen::MatrixXd;
using Eigen::VectorXd;

void residual_and_jacobian(const PolySystem& sys, const VectorXd& v, VectorXd& res, MatrixXd& jac) {
  const int m = sys.m;
  const int r = sys.r;
  res = VectorXd::Zero(r);
  jac = MatrixXd::Zero(r, 3 * m);
  for (int l = 0; l < m; ++l) {
    const double p = v[l];
    const auto c = moment_terms(v[m + l], v[2 * m + l], r);
    for (int s = 1; s <= r; ++s) {
      res[s - 1] += p * p * c[static_cast<std::size_t>(s)];
      jac(s - 1, l) = 2.0 * p * c[static_cast<std::size_t>(s)];
      jac(s - 1, m + l) = p * p * c[static_cast<std::size_t>(s - 1)];
      jac(s - 1, 2 * m + l) = s >= 2 ? p * p * c[static_cast<std::size_t>(s - 2)] : 0.0;
    }
  }
}

/// Puts v back on the normalized slice: sum p^2 = 1 with |p_l| >= p_floor, and
/// (q1, q2) -> (q1/c, q2/c^2) with c = ||q1||. Both maps send zero-residual
/// points to zero-residual points.
bool project(VectorXd& v, int m, double p_floor) {
  auto p = v.head(m);
  for (int pass = 0; pass < 2; ++pass) {
    const double pn = p.norm();
    if (!(pn > 0.0) || !std::isfinite(pn)) return false;
    p /= pn;
    for (int l = 0; l < m; ++l)
      if (std::abs(p[l]) < p_floor) p[l] = p[l] < 0.0 ? -p_floor : p_floor;
  }
  p /= p.norm();
  const double c = v.segment(m, m).norm();
  if (!(c > 0.0) || !std::isfinite(c)) return false;
  v.segment(m, m) /= c;
  v.segment(2 * m, m) /= c * c;
  return v.allFinite();
}

double residual_norm(const PolySystem& sys, const VectorXd& v) {
  const std::vector<double> vals(v.data(), v.data() + v.size());
  const auto r = poly_residuals(sys, vals);
  double s = 0.0;
  for (double e : r) s += e * e;
  return std::sqrt(s);
}

}  // namespace

int rbar_known(int m) {
  if (m <= 0) throw ArgumentError("rbar needs a positive cell size");
  switch (m) {
    case 1: return 2;
    case 2: return 4;
    case 3: return 6;
    default: throw UnsupportedError("rbar(" + std::to_string(m) + ") is not known; only a lower bound of 7 exists");
  }
}

std::vector<double> poly_residuals(const PolySystem& sys, const std::vector<double>& values) {
  check_system(sys, values.size());
  const std::size_t m = static_cast<std::size_t>(sys.m);
  std::vector<double> out(static_cast<std::size_t>(sys.r), 0.0);
  for (std::size_t l = 0; l < m; ++l) {
    const double p2 = values[l] * values[l];
    const auto c = moment_terms(values[m + l], values[2 * m + l], sys.r);
    for (int s = 1; s <= sys.r; ++s) out[static_cast<std::size_t>(s - 1)] += p2 * c[static_cast<std::size_t>(s)];
  }
  return out;
}

SearchResult search_nontrivial(const PolySystem& sys, const SearchOptions& opts) {
  check_system(sys, 3 * static_cast<std::size_t>(std::max(sys.m, 1)));
  if (opts.restarts < 1) throw ArgumentError("search needs at least one restart");
  const int m = sys.m;
  const int dim = 3 * m;
  Philox rng(opts.seed, 0);
  SearchResult best;
  best.best_norm = std::numeric_limits<double>::infinity();

  VectorXd res, trial_res;
  MatrixXd jac, trial_jac;
  for (int restart = 0; restart < opts.restarts; ++restart) {
    best.restarts_used = restart + 1;
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = rng.normal();
    if (!project(v, m, opts.p_floor)) continue;
    double norm = residual_norm(sys, v);
    double lambda = 1e-3;
    for (int it = 0; it < opts.max_iters && norm > 1e-3 * opts.found_tol; ++it) {
      residual_and_jacobian(sys, v, res, jac);
      const MatrixXd jtj = jac.transpose() * jac;
      const VectorXd g = jac.transpose() * res;
      bool improved = false;
      while (lambda < 1e12) {
        MatrixXd a = jtj;
        a.diagonal().array() += lambda * (1.0 + jtj.diagonal().array());
        VectorXd trial = v - a.ldlt().solve(g);
        if (project(trial, m, opts.p_floor)) {
          const double tn = residual_norm(sys, trial);
          if (tn < norm) {
            v = trial;
            norm = tn;
            lambda = std::max(lambda * 0.3, 1e-15);
            improved = true;
            break;
          }
        }
        lambda *= 4.0;
      }
      if (!improved) break;
    }
    const double max_q1 = v.segment(m, m).cwiseAbs().maxCoeff();
    const double min_p = v.head(m).cwiseAbs().minCoeff();
    if (max_q1 < opts.q_floor || min_p < opts.p_floor * (1.0 - 1e-12)) continue;
    if (norm < best.best_norm) {
      best.best_norm = norm;
      best.values.assign(v.data(), v.data() + v.size());
    }
    if (norm < opts.found_tol) {
      best.found = true;
      break;
    }
  }
  return best;
}

std::size_t independence_feature_count(int order, std::size_t d) {
  if (order == 1) return 2 + d;
  if (order == 2) return 3 + 2 * d + d * (d + 1);
  throw ArgumentError("independence order must be 1 or 2");
}

std::vector<double> independence_features(const Activation& act, int order, const std::vector<double>& w,
                                          std::size_t n_probe, std::uint64_t seed) {
  const std::size_t d = w.size();
  if (d == 0) throw ArgumentError("independence check needs a nonempty w");
  for (double v : w)
    if (!std::isfinite(v)) throw ArgumentError("w must be finite");
  const std::size_t f = independence_feature_count(order, d);
  std::vector<double> rows;
  rows.reserve(n_probe * f);
  Philox rng(seed, 0);
  std::vector<double> x(d);
  for (std::size_t t = 0; t < n_probe; ++t) {
    double s = 0.0;
    for (std::size_t u = 0; u < d; ++u) {
      x[u] = rng.normal();
      s += w[u] * x[u];
    }
    const double v0 = act.value(s);
    const double v1 = act.d1(s);
    rows.push_back(1.0);
    rows.push_back(v0);
    if (order == 2) rows.push_back(v0 * v0);
    for (std::size_t u = 0; u < d; ++u) rows.push_back(v1 * x[u]);
    if (order == 2) {
      const double v2 = act.d2(s);
      for (std::size_t u = 0; u < d; ++u) rows.push_back(v0 * v1 * x[u]);
      for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = u; v < d; ++v) rows.push_back(v1 * v1 * x[u] * x[v]);
      for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = u; v < d; ++v) rows.push_back(v2 * x[u] * x[v]);
    }
  }
  return rows;
}

double min_singular_ratio(const std::vector<double>& rows, std::size_t n_rows, std::size_t n_cols) {
  if (rows.size() != n_rows * n_cols || n_cols == 0) throw ArgumentError("feature matrix has the wrong size");
  MatrixXd a(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t j = 0; j < n_cols; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i * n_cols + j];
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double rms = a.col(j).norm() / std::sqrt(static_cast<double>(n_rows));
    if (!(rms > 0.0)) return 0.0;
    a.col(j) /= rms;
  }
  Eigen::JacobiSVD<MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) return 0.0;
  return sv[sv.size() - 1] / sv[0];
}

IndependenceResult independence_check(const Activation& act, int order, const std::vector<double>& w,
                                      std::size_t n_probe, std::uint64_t seed, double threshold) {
  const std::size_t f = independence_feature_count(order, w.size());
  if (n_probe == 0) n_probe = 64 * f;
  if (n_probe < 4 * f) throw ArgumentError("independence check needs at least 4 probes per feature");
  IndependenceResult out;
  out.n_features = f;
  out.n_probe = n_probe;
  out.min_sv_ratio = min_singular_ratio(independence_features(act, order, w, n_probe, seed), n_probe, f);
  out.independent = out.min_sv_ratio > threshold;
  return out;
}

SlopeFit loglog_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ArgumentError("slope fit needs at least two points");
  SlopeFit fit;
  for (const auto& [n, loss] : points) {
    if (!(n > 0.0) || !(loss > 0.0) || !std::isfinite(n) || !std::isfinite(loss))
      throw ArgumentError("slope fit needs positive finite sample sizes and losses");
    fit.points.emplace_back(std::log(n), std::log(loss));
  }
  const double k = static_cast<double>(fit.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : fit.points) {
    mx += x;
    my += y;
  }
  mx /= k;
  my /= k;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (!(sxx > 0.0)) throw ArgumentError("slope fit needs at least two distinct sample sizes");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (fit.points.size() > 2) {
    double ssr = 0.0;
    for (const auto& [x, y] : fit.points) {
      const double e = y - fit.intercept - fit.slope * x;
      ssr += e * e;
    }
    fit.stderr_slope = std::sqrt(ssr / (k - 2.0) / sxx);
  }
  return fit;
}

}  // namespace moe
