#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "moelab/simd/kernels.hpp"

namespace moe::simd {

namespace {

void affine(const double* cols, std::size_t n, std::span<const double> coef, double intercept, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = intercept;
  for (std::size_t u = 0; u < coef.size(); ++u) {
    const double c = coef[u];
    const double* col = cols + u * n;
    for (std::size_t i = 0; i < n; ++i) out[i] += c * col[i];
  }
}

void gaussian_logpdf(const double* y, const double* mean, std::size_t n, double var, double* out) {
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
  const double half_prec = 0.5 / var;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - mean[i];
    out[i] = norm - r * r * half_prec;
  }
}

void accumulate_gaussian_pdf(const double* y, std::size_t n, double mean, double var, double weight, double* out) {
  const double scale = weight / std::sqrt(2.0 * std::numbers::pi * var);
  const double half_prec = 0.5 / var;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - mean;
    out[i] += scale * std::exp(-r * r * half_prec);
  }
}

void logsumexp_cols(const double* cols, std::size_t k, std::size_t n, double* out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double m = kNegInf;
    for (std::size_t j = 0; j < k; ++j) m = std::max(m, cols[j * n + i]);
    if (m == kNegInf) {
      out[i] = kNegInf;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(cols[j * n + i] - m);
    out[i] = m + std::log(s);
  }
}

void exp_shifted(const double* in, const double* shift, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i] - shift[i]);
}

double weighted_dot(const double* w, const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

double dot(const double* w, const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * a[i];
  return s;
}

double sum(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar", affine, gaussian_logpdf, accumulate_gaussian_pdf, logsumexp_cols, exp_shifted, weighted_dot, dot, sum,
  };
  return table;
}

}  // namespace moe::simd
