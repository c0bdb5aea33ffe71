// Copyright 2026 The certrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <immintrin.h>

#include <cmath>

#include "certrl/simd.hpp"

namespace certrl::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double alpha, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

void soft_threshold_avx2(double* x, std::size_t n, double t) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d vt = _mm256_set1_pd(t);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    const __m256d sign = _mm256_and_pd(v, sign_mask);
    const __m256d mag = _mm256_sub_pd(_mm256_andnot_pd(sign_mask, v), vt);
    const __m256d keep = _mm256_cmp_pd(mag, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(x + i, _mm256_and_pd(keep, _mm256_or_pd(mag, sign)));
  }
  for (; i < n; ++i) {
    const double mag = std::fabs(x[i]) - t;
    x[i] = mag > 0.0 ? std::copysign(mag, x[i]) : 0.0;
  }
}

void add_sqdiff_avx2(double q, const double* col, double* acc, std::size_t n) {
  const __m256d vq = _mm256_set1_pd(q);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(vq, _mm256_loadu_pd(col + i));
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(d, d, _mm256_loadu_pd(acc + i)));
  }
  for (; i < n; ++i) {
    const double d = q - col[i];
    acc[i] += d * d;
  }
}

void add_scaled_avx2(double q, const double* col, double* acc, std::size_t n) {
  axpy_avx2(q, col, acc, n);
}

// exp(x) for x <= 0 with the Cephes rational approximation; < 2 ulp on the
// normal range, flushes to 0 below -745.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-745.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lo);

  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  r = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), r);

  const __m256d rr = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.26177193074810590878E-4), rr,
                              _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042E-6), rr,
                              _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

  // 2^fx split in two factors so each stays a normal number.
  const __m256d half = _mm256_round_pd(_mm256_mul_pd(fx, _mm256_set1_pd(0.5)),
                                       _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC);
  const __m256d rest = _mm256_sub_pd(fx, half);
  const __m256d magic = _mm256_set1_pd(6755399441055744.0);  // 2^52 + 2^51
  auto pow2 = [&](__m256d k) {
    __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(_mm256_add_pd(k, magic)),
                                    _mm256_castpd_si256(magic));
    bits = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
    return _mm256_castsi256_pd(bits);
  };
  e = _mm256_mul_pd(_mm256_mul_pd(e, pow2(half)), pow2(rest));
  return _mm256_andnot_pd(underflow, e);
}

void gaussian_avx2(const double* sq, double inv2s2, double pref, double* out, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(-inv2s2);
  const __m256d vp = _mm256_set1_pd(pref);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d arg = _mm256_mul_pd(vs, _mm256_loadu_pd(sq + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(vp, exp_nonpositive(arg)));
  }
  if (i < n) {
    alignas(32) double tmp_in[4] = {0.0, 0.0, 0.0, 0.0};
    alignas(32) double tmp_out[4];
    for (std::size_t j = i; j < n; ++j) tmp_in[j - i] = sq[j];
    const __m256d arg = _mm256_mul_pd(vs, _mm256_load_pd(tmp_in));
    _mm256_store_pd(tmp_out, _mm256_mul_pd(vp, exp_nonpositive(arg)));
    for (std::size_t j = i; j < n; ++j) out[j] = tmp_out[j - i];
  }
}

void multiply_avx2(const double* a, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] *= a[i];
}

void combine_avx2(const double* a, double c, const double* b, double* y, std::size_t n) {
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(vc, _mm256_loadu_pd(b + i), _mm256_loadu_pd(a + i)));
  }
  for (; i < n; ++i) y[i] = a[i] + c * b[i];
}

constexpr Ops kAvx2{dot_avx2,        axpy_avx2,     scale_avx2,   soft_threshold_avx2, add_sqdiff_avx2,
                    add_scaled_avx2, gaussian_avx2, multiply_avx2, combine_avx2};

}  // namespace

const Ops* avx2_ops() { return &kAvx2; }

}  // namespace certrl::simd
