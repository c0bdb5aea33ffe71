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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "certrl/simd.hpp"

namespace certrl::simd {

#ifndef CERTRL_WITH_AVX2
const Ops* avx2_ops() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && defined(__GNUC__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("CERTRL_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && backend_supported(Backend::avx2)) return Backend::avx2;
  }
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

inline const Ops& ops() { return ops_for(current().load(std::memory_order_relaxed)); }

void check_same(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd: length mismatch");
}

}  // namespace

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool backend_supported(Backend b) {
  if (b == Backend::scalar) return true;
  return avx2_ops() != nullptr && cpu_has_avx2();
}

Backend active_backend() { return current().load(); }

void set_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument("simd backend not supported: " + std::string(backend_name(b)));
  }
  current().store(b);
}

const Ops& ops_for(Backend b) {
  if (b == Backend::avx2) {
    if (const Ops* o = avx2_ops()) return *o;
  }
  return scalar_ops();
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size());
  return ops().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  check_same(x.size(), y.size());
  ops().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> x) { ops().scale(alpha, x.data(), x.size()); }

void soft_threshold(std::span<double> x, double t) { ops().soft_threshold(x.data(), x.size(), t); }

void add_sqdiff(double q, std::span<const double> col, std::span<double> acc) {
  check_same(col.size(), acc.size());
  ops().add_sqdiff(q, col.data(), acc.data(), col.size());
}

void add_scaled(double q, std::span<const double> col, std::span<double> acc) {
  check_same(col.size(), acc.size());
  ops().add_scaled(q, col.data(), acc.data(), col.size());
}

void gaussian_from_sqdist(std::span<const double> sq, double inv_two_sigma_sq, double pref,
                          std::span<double> out) {
  check_same(sq.size(), out.size());
  ops().gaussian_from_sqdist(sq.data(), inv_two_sigma_sq, pref, out.data(), sq.size());
}

void multiply(std::span<const double> a, std::span<double> y) {
  check_same(a.size(), y.size());
  ops().multiply(a.data(), y.data(), a.size());
}

void combine(std::span<const double> a, double c, std::span<const double> b, std::span<double> y) {
  check_same(a.size(), b.size());
  check_same(a.size(), y.size());
  ops().combine(a.data(), c, b.data(), y.data(), a.size());
}

}  // namespace certrl::simd
