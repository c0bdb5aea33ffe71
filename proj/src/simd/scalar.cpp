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

#include <cmath>

#include "certrl/simd.hpp"

namespace certrl::simd {
namespace {

double dot_ref(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale_ref(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void soft_threshold_ref(double* x, std::size_t n, double t) {
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::fabs(x[i]) - t;
    x[i] = mag > 0.0 ? std::copysign(mag, x[i]) : 0.0;
  }
}

void add_sqdiff_ref(double q, const double* col, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = q - col[i];
    acc[i] += d * d;
  }
}

void add_scaled_ref(double q, const double* col, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += q * col[i];
}

void gaussian_ref(const double* sq, double inv2s2, double pref, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = pref * std::exp(-inv2s2 * sq[i]);
}

void multiply_ref(const double* a, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a[i];
}

void combine_ref(const double* a, double c, const double* b, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + c * b[i];
}

constexpr Ops kScalar{dot_ref,        axpy_ref,     scale_ref,   soft_threshold_ref, add_sqdiff_ref,
                      add_scaled_ref, gaussian_ref, multiply_ref, combine_ref};

}  // namespace

const Ops& scalar_ops() { return kScalar; }

}  // namespace certrl::simd
