#pragma once

// Batched arithmetic kernels behind the E-step, IRLS and quadrature loops.
//
// Every kernel has a scalar reference implementation; wider variants must agree
// with it to a few ulps (reductions may reassociate). The active table is chosen
// once per process from the CPU features, and can be forced with
// MOE_LAB_KERNELS=scalar|avx2.

#include <cstddef>
#include <span>
#include <string_view>

namespace moe::simd {

struct KernelTable {
  std::string_view name;

  /// out[i] = intercept + sum_u coef[u] * cols[u*n + i]   (cols column-major, n x coef.size())
  void (*affine)(const double* cols, std::size_t n, std::span<const double> coef, double intercept, double* out);

  /// out[i] = log N(y[i] | mean[i], var)
  void (*gaussian_logpdf)(const double* y, const double* mean, std::size_t n, double var, double* out);

  /// out[i] += weight * N(y[i] | mean, var)
  void (*accumulate_gaussian_pdf)(const double* y, std::size_t n, double mean, double var, double weight,
                                  double* out);

  /// out[i] = log sum_j exp(cols[j*n + i]), j < k. -inf when every term is -inf.
  void (*logsumexp_cols)(const double* cols, std::size_t k, std::size_t n, double* out);

  /// out[i] = exp(in[i] - shift[i])
  void (*exp_shifted)(const double* in, const double* shift, std::size_t n, double* out);

  /// sum_i w[i] * a[i] * b[i]
  double (*weighted_dot)(const double* w, const double* a, const double* b, std::size_t n);

  /// sum_i w[i] * a[i]
  double (*dot)(const double* w, const double* a, std::size_t n);

  /// sum_i a[i]
  double (*sum)(const double* a, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();

/// Table selected for this process.
const KernelTable& active_kernels();

}  // namespace moe::simd
