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
#include <random>
#include <stdexcept>
#include <vector>

#include "certrl/simd.hpp"
#include "doctest.h"

using namespace certrl;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= tol * (1.0 + std::fabs(a[i])));
}

// Lengths straddle the 4-wide vector body and the scalar tail.
const std::size_t kLengths[] = {0, 1, 3, 4, 5, 7, 8, 9, 16, 31, 64, 101};

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(simd::backend_supported(simd::Backend::scalar));
  CHECK(simd::backend_name(simd::Backend::scalar) == "scalar");
}

TEST_CASE("avx2 variants agree with the scalar reference") {
  const simd::Ops* vec = simd::avx2_ops();
  if (!vec || !simd::backend_supported(simd::Backend::avx2)) {
    MESSAGE("AVX2 not available; equivalence skipped");
    return;
  }
  const simd::Ops& ref = simd::scalar_ops();
  std::mt19937_64 rng(7);
  for (std::size_t n : kLengths) {
    CAPTURE(n);
    const auto a = random_vec(rng, n), b = random_vec(rng, n);
    const double alpha = 0.37;

    CHECK(std::fabs(ref.dot(a.data(), b.data(), n) - vec->dot(a.data(), b.data(), n)) <= 1e-12 * (1.0 + n));

    auto y1 = b, y2 = b;
    ref.axpy(alpha, a.data(), y1.data(), n);
    vec->axpy(alpha, a.data(), y2.data(), n);
    check_close(y1, y2, 1e-15);

    y1 = a, y2 = a;
    ref.scale(alpha, y1.data(), n);
    vec->scale(alpha, y2.data(), n);
    check_close(y1, y2, 0.0);

    y1 = a, y2 = a;
    ref.soft_threshold(y1.data(), n, 0.8);
    vec->soft_threshold(y2.data(), n, 0.8);
    check_close(y1, y2, 0.0);

    y1 = b, y2 = b;
    ref.add_sqdiff(0.4, a.data(), y1.data(), n);
    vec->add_sqdiff(0.4, a.data(), y2.data(), n);
    check_close(y1, y2, 1e-15);

    y1 = b, y2 = b;
    ref.add_scaled(-1.3, a.data(), y1.data(), n);
    vec->add_scaled(-1.3, a.data(), y2.data(), n);
    check_close(y1, y2, 1e-15);

    auto sq = random_vec(rng, n, 0.0, 40.0);
    y1.assign(n, 0.0), y2.assign(n, 0.0);
    ref.gaussian_from_sqdist(sq.data(), 0.125, 0.3, y1.data(), n);
    vec->gaussian_from_sqdist(sq.data(), 0.125, 0.3, y2.data(), n);
    check_close(y1, y2, 1e-13);

    y1 = b, y2 = b;
    ref.multiply(a.data(), y1.data(), n);
    vec->multiply(a.data(), y2.data(), n);
    check_close(y1, y2, 0.0);

    y1.assign(n, 0.0), y2.assign(n, 0.0);
    ref.combine(a.data(), -0.9, b.data(), y1.data(), n);
    vec->combine(a.data(), -0.9, b.data(), y2.data(), n);
    check_close(y1, y2, 1e-15);
  }
}

TEST_CASE("backend switch routes the span API") {
  const auto saved = simd::active_backend();
  std::mt19937_64 rng(3);
  const auto a = random_vec(rng, 37), b = random_vec(rng, 37);
  simd::set_backend(simd::Backend::scalar);
  CHECK(simd::active_backend() == simd::Backend::scalar);
  const double d_scalar = simd::dot(a, b);
  if (simd::backend_supported(simd::Backend::avx2)) {
    simd::set_backend(simd::Backend::avx2);
    CHECK(std::fabs(simd::dot(a, b) - d_scalar) <= 1e-12);
  } else {
    CHECK_THROWS_AS(simd::set_backend(simd::Backend::avx2), std::invalid_argument);
  }
  simd::set_backend(saved);
}

TEST_CASE("soft threshold boundary values") {
  std::vector<double> x{0.5, -0.1, 0.0, -0.9};
  simd::soft_threshold(x, 0.2);
  CHECK(x[0] == doctest::Approx(0.3));
  CHECK(x[1] == 0.0);
  CHECK(x[2] == 0.0);
  CHECK(x[3] == doctest::Approx(-0.7));
}
