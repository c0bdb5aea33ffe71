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

#pragma once

// Data-parallel inner loops shared by the kernel learners.
//
// Every routine has a scalar reference implementation and, on x86-64 with
// AVX2+FMA, a vectorized variant. The active backend is chosen once at
// startup from CPUID and can be overridden with the CERTRL_SIMD environment
// variable ("scalar" or "avx2") or set_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace certrl::simd {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();
// Throws std::invalid_argument when the backend is not available on this CPU.
void set_backend(Backend b);

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scale(double alpha, std::span<double> x);
// x_i <- sgn(x_i) max(|x_i| - t, 0)
void soft_threshold(std::span<double> x, double t);
// acc_j += (q - col_j)^2
void add_sqdiff(double q, std::span<const double> col, std::span<double> acc);
// acc_j += q * col_j
void add_scaled(double q, std::span<const double> col, std::span<double> acc);
// out_j = pref * exp(-inv_two_sigma_sq * sq_j)
void gaussian_from_sqdist(std::span<const double> sq, double inv_two_sigma_sq, double pref,
                          std::span<double> out);
// y_j *= a_j
void multiply(std::span<const double> a, std::span<double> y);
// y_j = a_j + c * b_j
void combine(std::span<const double> a, double c, std::span<const double> b, std::span<double> y);

// Per-backend entry points, exposed for equivalence testing.
struct Ops {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*soft_threshold)(double*, std::size_t, double);
  void (*add_sqdiff)(double, const double*, double*, std::size_t);
  void (*add_scaled)(double, const double*, double*, std::size_t);
  void (*gaussian_from_sqdist)(const double*, double, double, double*, std::size_t);
  void (*multiply)(const double*, double*, std::size_t);
  void (*combine)(const double*, double, const double*, double*, std::size_t);
};

const Ops& scalar_ops();
// nullptr when the binary was built without AVX2 support.
const Ops* avx2_ops();
const Ops& ops_for(Backend b);

}  // namespace certrl::simd
