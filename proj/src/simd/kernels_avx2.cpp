// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the runtime feature check in dispatch.cpp.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "moelab/simd/kernels.hpp"

namespace moe::simd::avx2 {

namespace {

constexpr std::size_t kLanes = 4;

// 1.5 * 2^52: adding it to an integral double leaves the integer in the low
// mantissa bits.
constexpr double kMagic = 6755399441055744.0;

inline __m256i to_int64(__m256d integral) {
  const __m256d magic = _mm256_set1_pd(kMagic);
  return _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(integral, magic)), _mm256_castpd_si256(magic));
}

inline __m256d to_double(__m256i v) {
  const __m256d magic = _mm256_set1_pd(kMagic);
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_add_epi64(v, _mm256_castpd_si256(magic))), magic);
}

// 2^n for n in [-1022, 1023].
inline __m256d pow2(__m256i n) {
  return _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(n, _mm256_set1_epi64x(1023)), 52));
}

// Cephes-style exp: x = n ln2 + r, |r| <= ln2/2, Pade form for e^r.
// Inputs below -708.39 flush to zero; above 709.78 give +inf.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.78);
  const __m256d lo = _mm256_set1_pd(-708.39);
  const __m256d xc = _mm256_max_pd(_mm256_min_pd(x, hi), lo);

  const __m256d fn = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(std::numbers::log2e)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(6.93145751953125e-1), xc);
  r = _mm256_fnmadd_pd(fn, _mm256_set1_pd(1.42860682030941723212e-6), r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.26177193074810590878e-4), rr, _mm256_set1_pd(3.02994407707441961300e-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042e-6), rr, _mm256_set1_pd(2.52448340349684104192e-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009e0));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // Split the scale so 2^n never leaves the normal range.
  const __m256d fn1 = _mm256_floor_pd(_mm256_mul_pd(fn, _mm256_set1_pd(0.5)));
  const __m256i n1 = to_int64(fn1);
  const __m256i n2 = to_int64(_mm256_sub_pd(fn, fn1));
  e = _mm256_mul_pd(_mm256_mul_pd(e, pow2(n1)), pow2(n2));

  const __m256d zero = _mm256_setzero_pd();
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  e = _mm256_blendv_pd(e, zero, _mm256_cmp_pd(x, lo, _CMP_LT_OQ));
  e = _mm256_blendv_pd(e, inf, _mm256_cmp_pd(x, hi, _CMP_GT_OQ));
  return _mm256_blendv_pd(e, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

// Cephes-style log: x = m 2^e with m in [sqrt(1/2), sqrt(2)), rational
// approximation of log(1+f).
inline __m256d log_pd(__m256d x) {
  const __m256d tiny = _mm256_set1_pd(std::numeric_limits<double>::min());
  const __m256d sub_mask = _mm256_cmp_pd(x, tiny, _CMP_LT_OQ);
  const __m256d xs = _mm256_blendv_pd(x, _mm256_mul_pd(x, _mm256_set1_pd(4503599627370496.0)), sub_mask);
  const __m256d e_adj = _mm256_and_pd(sub_mask, _mm256_set1_pd(52.0));

  const __m256i bits = _mm256_castpd_si256(xs);
  const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
  __m256d e = _mm256_sub_pd(to_double(_mm256_sub_epi64(exp_bits, _mm256_set1_epi64x(1022))), e_adj);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  __m256d m = _mm256_castsi256_pd(
      _mm256_or_si256(_mm256_and_si256(bits, mant_mask), _mm256_set1_epi64x(0x3FE0000000000000LL)));

  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(std::numbers::sqrt2 / 2.0), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, one));
  m = _mm256_sub_pd(_mm256_add_pd(m, _mm256_and_pd(small, m)), one);

  const __m256d z = _mm256_mul_pd(m, m);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.01875663804580931796e-4), m, _mm256_set1_pd(4.97494994976747001425e-1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(4.70579119878881725854e0));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(1.44989225341610930846e1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(1.79368678507819816313e1));
  p = _mm256_fmadd_pd(p, m, _mm256_set1_pd(7.70838733755885391666e0));
  __m256d q = _mm256_add_pd(m, _mm256_set1_pd(1.12873587189167450590e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(4.52279145837532221105e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(8.29875266912776603211e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(7.11544750618563894466e1));
  q = _mm256_fmadd_pd(q, m, _mm256_set1_pd(2.31251620126765340583e1));

  __m256d y = _mm256_mul_pd(m, _mm256_div_pd(_mm256_mul_pd(z, p), q));
  y = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, y);
  __m256d r = _mm256_add_pd(m, y);
  r = _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), r);

  const __m256d zero = _mm256_setzero_pd();
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  const __m256d nan = _mm256_set1_pd(std::numeric_limits<double>::quiet_NaN());
  r = _mm256_blendv_pd(r, _mm256_sub_pd(zero, inf), _mm256_cmp_pd(x, zero, _CMP_EQ_OQ));
  r = _mm256_blendv_pd(r, inf, _mm256_cmp_pd(x, inf, _CMP_EQ_OQ));
  return _mm256_blendv_pd(r, nan, _mm256_cmp_pd(x, zero, _CMP_NGE_UQ));  // x < 0 or NaN
}

inline double hsum(__m256d v) {
  alignas(32) double lanes[kLanes];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void affine(const double* cols, std::size_t n, std::span<const double> coef, double intercept, double* out) {
  const std::size_t nv = n - n % kLanes;
  const __m256d c0 = _mm256_set1_pd(intercept);
  for (std::size_t i = 0; i < nv; i += kLanes) _mm256_storeu_pd(out + i, c0);
  for (std::size_t i = nv; i < n; ++i) out[i] = intercept;
  for (std::size_t u = 0; u < coef.size(); ++u) {
    const double c = coef[u];
    const __m256d cv = _mm256_set1_pd(c);
    const double* col = cols + u * n;
    for (std::size_t i = 0; i < nv; i += kLanes)
      _mm256_storeu_pd(out + i, _mm256_fmadd_pd(cv, _mm256_loadu_pd(col + i), _mm256_loadu_pd(out + i)));
    for (std::size_t i = nv; i < n; ++i) out[i] += c * col[i];
  }
}

void gaussian_logpdf(const double* y, const double* mean, std::size_t n, double var, double* out) {
  const double norm = -0.5 * std::log(2.0 * std::numbers::pi * var);
  const double half_prec = 0.5 / var;
  const std::size_t nv = n - n % kLanes;
  const __m256d nv_norm = _mm256_set1_pd(norm);
  const __m256d nv_hp = _mm256_set1_pd(half_prec);
  for (std::size_t i = 0; i < nv; i += kLanes) {
    const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(mean + i));
    _mm256_storeu_pd(out + i, _mm256_fnmadd_pd(_mm256_mul_pd(r, r), nv_hp, nv_norm));
  }
  for (std::size_t i = nv; i < n; ++i) {
    const double r = y[i] - mean[i];
    out[i] = norm - r * r * half_prec;
  }
}

void accumulate_gaussian_pdf(const double* y, std::size_t n, double mean, double var, double weight, double* out) {
  const double scale = weight / std::sqrt(2.0 * std::numbers::pi * var);
  const double half_prec = 0.5 / var;
  const std::size_t nv = n - n % kLanes;
  const __m256d mv = _mm256_set1_pd(mean);
  const __m256d neg_hp = _mm256_set1_pd(-half_prec);
  const __m256d sv = _mm256_set1_pd(scale);
  for (std::size_t i = 0; i < nv; i += kLanes) {
    const __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), mv);
    const __m256d e = exp_pd(_mm256_mul_pd(_mm256_mul_pd(r, r), neg_hp));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(sv, e, _mm256_loadu_pd(out + i)));
  }
  for (std::size_t i = nv; i < n; ++i) {
    const double r = y[i] - mean;
    out[i] += scale * std::exp(-r * r * half_prec);
  }
}

void logsumexp_cols(const double* cols, std::size_t k, std::size_t n, double* out) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const std::size_t nv = n - n % kLanes;
  const __m256d neg_inf = _mm256_set1_pd(kNegInf);
  for (std::size_t i = 0; i < nv; i += kLanes) {
    __m256d m = neg_inf;
    for (std::size_t j = 0; j < k; ++j) m = _mm256_max_pd(m, _mm256_loadu_pd(cols + j * n + i));
    const __m256d all_neg_inf = _mm256_cmp_pd(m, neg_inf, _CMP_EQ_OQ);
    const __m256d m_safe = _mm256_blendv_pd(m, _mm256_setzero_pd(), all_neg_inf);
    __m256d s = _mm256_setzero_pd();
    for (std::size_t j = 0; j < k; ++j) s = _mm256_add_pd(s, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(cols + j * n + i), m_safe)));
    const __m256d r = _mm256_add_pd(m_safe, log_pd(s));
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(r, neg_inf, all_neg_inf));
  }
  for (std::size_t i = nv; i < n; ++i) {
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
  const std::size_t nv = n - n % kLanes;
  for (std::size_t i = 0; i < nv; i += kLanes)
    _mm256_storeu_pd(out + i, exp_pd(_mm256_sub_pd(_mm256_loadu_pd(in + i), _mm256_loadu_pd(shift + i))));
  for (std::size_t i = nv; i < n; ++i) out[i] = std::exp(in[i] - shift[i]);
}

double weighted_dot(const double* w, const double* a, const double* b, std::size_t n) {
  const std::size_t nv = n - n % (2 * kLanes);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (std::size_t i = 0; i < nv; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i)), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_mul_pd(_mm256_loadu_pd(w + i + 4), _mm256_loadu_pd(a + i + 4)),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (std::size_t i = nv; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

double dot(const double* w, const double* a, std::size_t n) {
  const std::size_t nv = n - n % (2 * kLanes);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (std::size_t i = 0; i < nv; i += 2 * kLanes) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(w + i + 4), _mm256_loadu_pd(a + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (std::size_t i = nv; i < n; ++i) s += w[i] * a[i];
  return s;
}

double sum(const double* a, std::size_t n) {
  const std::size_t nv = n - n % (2 * kLanes);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  for (std::size_t i = 0; i < nv; i += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(a + i + 4));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (std::size_t i = nv; i < n; ++i) s += a[i];
  return s;
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{
      "avx2", affine, gaussian_logpdf, accumulate_gaussian_pdf, logsumexp_cols, exp_shifted, weighted_dot, dot, sum,
  };
  return t;
}

}  // namespace moe::simd::avx2
