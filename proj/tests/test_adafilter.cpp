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
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "certrl/adafilter.hpp"
#include "certrl_verify/oracles.hpp"
#include "doctest.h"

using namespace certrl;

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

double norm(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

FilterState gaussian_filter(std::size_t r_max, std::vector<double> sigmas, std::size_t dim) {
  Dictionary d(r_max);
  for (double s : sigmas) d.add_kernel(KernelSpec::gaussian(s, dim), dim);
  return FilterState(std::move(d));
}

ApfbsConfig cfg(double step, std::size_t window, double l1, double slab, double novelty = 0.1) {
  ApfbsConfig c;
  c.step = step;
  c.window = window;
  c.l1 = l1;
  c.slab = slab;
  c.novelty = novelty;
  return c;
}

}  // namespace

TEST_CASE("prediction") {
  FilterState empty = gaussian_filter(10, {1.0}, 1);
  CHECK(predict(empty, std::vector<double>{0.4}) == 0.0);

  Dictionary dc(10);
  dc.add_kernel(KernelSpec::constant(), 1);
  FilterState c(std::move(dc));
  c.append_atom(0, std::vector<double>{3.0}, 2.5);
  CHECK(predict(c, std::vector<double>{-7.0}) == 2.5);

  FilterState g = gaussian_filter(10, {1.0}, 1);
  g.append_atom(0, std::vector<double>{0.0}, 1.0);
  g.append_atom(0, std::vector<double>{1.0}, -1.0);
  CHECK(predict(g, std::vector<double>{0.0}) == doctest::Approx(kInvSqrt2Pi * (1.0 - std::exp(-0.5))).epsilon(1e-12));
  CHECK(predict(g, std::vector<double>{0.0}) == doctest::Approx(0.15698).epsilon(1e-4));
  CHECK_THROWS(predict(g, std::vector<double>{0.0, 1.0}));
}

TEST_CASE("hyperslab projection") {
  CHECK(project_hyperslab(std::vector<double>{0.0}, std::vector<double>{1.0}, 1.0, 0.2)[0] == doctest::Approx(0.8));
  const auto inside = project_hyperslab(std::vector<double>{0.9}, std::vector<double>{1.0}, 1.0, 0.2);
  CHECK(inside[0] == 0.9);
  const auto plane = project_hyperslab(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 0.0}, 0.0, 0.0);
  CHECK(plane[0] == 0.0);
  CHECK(plane[1] == 1.0);
  const std::vector<double> h{1.0, -2.0};
  CHECK(project_hyperslab(h, std::vector<double>{0.0, 0.0}, 5.0, 0.0) == h);
}

TEST_CASE("hyperslab projection is idempotent and firmly nonexpansive toward the slab") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + trial % 7;
    const auto h = draw(rng, n, -3.0, 3.0), k = draw(rng, n);
    const double target = 2.0 * u(rng) - 1.0, eps = 0.3 * u(rng);
    const auto p = project_hyperslab(h, k, target, eps);
    const auto pp = project_hyperslab(p, k, target, eps);
    CHECK(norm(p, pp) <= 1e-12);
    CHECK(std::fabs(dot(p, k) - target) <= eps + 1e-12);
    // Any point of the slab is at least as close to p as to h.
    auto y = draw(rng, n, -3.0, 3.0);
    y = project_hyperslab(y, k, target, eps);
    CHECK(norm(p, y) <= norm(h, y) + 1e-12);
  }
}

TEST_CASE("soft threshold") {
  const auto a = soft_threshold(std::vector<double>{0.5, -0.1, 0.0}, 0.2);
  CHECK(a[0] == doctest::Approx(0.3));
  CHECK(a[1] == 0.0);
  CHECK(a[2] == 0.0);
  const std::vector<double> h{1.5, -0.2, 3.0};
  CHECK(soft_threshold(h, 0.0) == h);
  CHECK(soft_threshold(std::vector<double>{0.30001}, 0.3)[0] == doctest::Approx(1e-5).epsilon(1e-6));
}

TEST_CASE("soft threshold is the l1 proximity operator") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = draw(rng, 4, -2.0, 2.0);
    const double t = ut(rng);
    const auto x = soft_threshold(h, t);
    for (std::size_t i = 0; i < h.size(); ++i) {
      CHECK(std::fabs(x[i] - oracle::soft_threshold_grid(h[i], t)) <= 1e-4);
    }
  }
}

TEST_CASE("apfbs update") {
  SUBCASE("unit step lands on the hyperplane") {
    FilterState s = gaussian_filter(10, {1.0}, 1);
    s.append_atom(0, std::vector<double>{0.0}, 0.3);
    s.append_atom(0, std::vector<double>{0.7}, -0.1);
    TransitionWindow w(1);
    w.push({0.2}, 1.7);
    const auto out = apfbs_update(s, w, cfg(1.0, 1, 0.0, 0.0));
    CHECK(predict(out, std::vector<double>{0.2}) == doctest::Approx(1.7).epsilon(1e-12));
  }
  SUBCASE("fixed point inside every slab") {
    FilterState s = gaussian_filter(10, {1.0}, 1);
    s.append_atom(0, std::vector<double>{0.0}, 1.0);
    TransitionWindow w(3);
    for (double z : {0.0, 0.5, -0.5}) w.push({z}, predict(s, std::vector<double>{z}));
    const auto out = apfbs_update(s, w, cfg(0.5, 3, 0.0, 0.0));
    CHECK(out.flat_coefficients() == s.flat_coefficients());
  }
  SUBCASE("empty window leaves the state unchanged") {
    FilterState s = gaussian_filter(10, {1.0}, 1);
    s.append_atom(0, std::vector<double>{0.0}, 1.0);
    CHECK(apfbs_update(s, TransitionWindow(3), cfg(0.5, 3, 0.1, 0.0)).flat_coefficients() == s.flat_coefficients());
  }
  SUBCASE("partially filled window averages over occupancy") {
    FilterState s = gaussian_filter(10, {1.0}, 1);
    s.append_atom(0, std::vector<double>{0.0}, 0.0);
    TransitionWindow w(5);
    w.push({0.0}, 1.0);
    // One pair of five: the full projection is taken with weight lambda, not lambda / 5.
    const auto out = apfbs_update(s, w, cfg(1.0, 5, 0.0, 0.0));
    CHECK(predict(out, std::vector<double>{0.0}) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("admission") {
  const ApfbsConfig c = cfg(0.1, 5, 0.0, 0.2, 0.1);
  FilterState s = gaussian_filter(4, {1.0, 2.0}, 1);
  s = admit_or_skip(s, std::vector<double>{0.0}, 1.0, c);
  CHECK(s.size() == 2);
  CHECK(s.flat_coefficients() == std::vector<double>{0.0, 0.0});

  // Zero prediction and zero target: nothing to learn.
  FilterState z = gaussian_filter(4, {1.0}, 1);
  CHECK(admit_or_skip(z, std::vector<double>{0.0}, 0.0, c).size() == 0);

  // Small normalized error: 0.04 <= 0.1 * 1.
  Dictionary dc(10);
  dc.add_kernel(KernelSpec::constant(), 1);
  FilterState one(std::move(dc));
  one.append_atom(0, std::vector<double>{0.0}, 1.0);
  CHECK(admit_or_skip(one, std::vector<double>{3.0}, 1.2, c).size() == 1);
  CHECK(admit_or_skip(one, std::vector<double>{3.0}, 2.0, c).size() == 2);

  // Cap: r + M must not exceed r_max.
  s = admit_or_skip(s, std::vector<double>{1.0}, 5.0, c);
  CHECK(s.size() == 4);
  CHECK(admit_or_skip(s, std::vector<double>{2.0}, 50.0, c).size() == 4);
}

TEST_CASE("pruning") {
  FilterState s = gaussian_filter(10, {1.0}, 1);
  s.append_atom(0, std::vector<double>{0.0}, 0.5);
  s.append_atom(0, std::vector<double>{1.0}, -0.5);
  CHECK(prune_zero_atoms(s).size() == 2);

  FilterState t = gaussian_filter(10, {1.0}, 1);
  t.append_atom(0, std::vector<double>{0.0}, 0.0);
  t.append_atom(0, std::vector<double>{1.0}, 1.0);
  const auto pruned = prune_zero_atoms(t);
  REQUIRE(pruned.size() == 1);
  for (double z : {-2.0, 0.0, 0.5, 3.0}) {
    CHECK(predict(pruned, std::vector<double>{z}) == predict(t, std::vector<double>{z}));
  }

  // After a strong prox every zero coefficient goes.
  FilterState u = gaussian_filter(10, {1.0}, 1);
  for (double c : {0.05, -0.02, 2.0, 0.01}) u.append_atom(0, std::vector<double>{c}, c);
  u.set_flat_coefficients(soft_threshold(u.flat_coefficients(), 0.1));
  std::size_t zeros = 0;
  for (double h : u.flat_coefficients()) zeros += (h == 0.0);
  CHECK(prune_zero_atoms(u, 1e-12).size() == u.size() - zeros);
}

TEST_CASE("monotone approximation toward a consistent sparse target") {
  std::mt19937_64 rng(31);
  FilterState truth = gaussian_filter(40, {1.0, 0.5}, 2);
  for (int j = 0; j < 6; ++j) {
    const auto c = draw(rng, 2);
    truth.append_atom(0, c, 0.0);
    truth.append_atom(1, c, 0.0);
  }
  auto h_true = truth.flat_coefficients();
  h_true[1] = 1.5;
  h_true[4] = -0.8;
  h_true[9] = 0.6;
  truth.set_flat_coefficients(h_true);

  FilterState est = truth;
  est.set_flat_coefficients(std::vector<double>(h_true.size(), 0.0));
  TransitionWindow w(5);
  const ApfbsConfig c = cfg(0.1, 5, 0.0, 0.0);
  std::size_t violations = 0, strict_misses = 0;
  double prev = norm(est.flat_coefficients(), h_true);
  for (int n = 0; n < 10000; ++n) {
    const auto z = draw(rng, 2);
    w.push(z, predict(truth, z));
    bool violated = false;
    for (const auto& p : w.pairs()) violated = violated || std::fabs(predict(est, p.z) - p.target) > 1e-9;
    est = apfbs_update(est, w, c);
    const double d = norm(est.flat_coefficients(), h_true);
    violations += d > prev + 1e-12;
    strict_misses += violated && !(d < prev);
    prev = d;
  }
  CHECK(violations == 0);
  CHECK(strict_misses == 0);
  CHECK(prev < norm(std::vector<double>(h_true.size(), 0.0), h_true));
}

TEST_CASE("with l1 the distance to a fixed point of the frozen operator does not grow") {
  std::mt19937_64 rng(41);
  FilterState s = gaussian_filter(20, {1.0}, 1);
  for (double c : {-1.0, -0.3, 0.2, 0.9}) s.append_atom(0, std::vector<double>{c}, 0.0);
  TransitionWindow w(4);
  for (double z : {-0.8, -0.1, 0.4, 1.0}) w.push({z}, std::sin(2.0 * z));
  const ApfbsConfig c = cfg(0.5, 4, 0.01, 0.05);
  FilterState fixed = s;
  for (int i = 0; i < 20000; ++i) fixed = apfbs_update(fixed, w, c);
  const auto hstar = fixed.flat_coefficients();
  CHECK(norm(apfbs_update(fixed, w, c).flat_coefficients(), hstar) <= 1e-9);

  FilterState x = s;
  x.set_flat_coefficients(draw(rng, 4, -3.0, 3.0));
  double prev = norm(x.flat_coefficients(), hstar);
  for (int i = 0; i < 500; ++i) {
    x = apfbs_update(x, w, c);
    const double d = norm(x.flat_coefficients(), hstar);
    CHECK(d <= prev + 1e-9);
    prev = d;
  }
}

TEST_CASE("online adapt keeps the dictionary within its cap and aligned") {
  std::mt19937_64 rng(2);
  FilterState s = gaussian_filter(30, {2.0, 1.0, 0.5}, 1);
  TransitionWindow w(5);
  const ApfbsConfig c = cfg(0.3, 5, 0.001, 0.01, 0.05);
  for (int n = 0; n < 2000; ++n) {
    const auto z = draw(rng, 1, -2.0, 2.0);
    adapt(s, w, z, std::cos(z[0]), c);
    REQUIRE(s.size() <= 30);
    std::size_t coefs = 0;
    for (std::size_t m = 0; m < s.dict.num_kernels(); ++m) {
      REQUIRE(s.h[m].size() == s.dict.block(m).centers.size());
      coefs += s.h[m].size();
    }
    REQUIRE(coefs == s.size());
  }
  double err = 0.0;
  for (double z = -1.5; z <= 1.5; z += 0.1) err = std::max(err, std::fabs(predict(s, std::vector<double>{z}) - std::cos(z)));
  CHECK(err < 0.3);
}

TEST_CASE("filter state round-trips through json") {
  std::mt19937_64 rng(8);
  FilterState s = gaussian_filter(50, {1.0, 0.3}, 2);
  for (int j = 0; j < 7; ++j) s.append_atom(j % 2, draw(rng, 2), draw(rng, 1)[0] / 3.0);
  const auto back = FilterState::from_json(s.to_json());
  const auto a = s.flat_coefficients(), b = back.flat_coefficients();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= 1e-15);
  const auto z = draw(rng, 2);
  CHECK(predict(back, z) == doctest::Approx(predict(s, z)).epsilon(1e-14));
  CHECK(back.dict.max_size() == 50);
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(cfg(0.1, 5, 0.01, 0.2).validate());
  CHECK_THROWS_AS(cfg(0.0, 5, 0.01, 0.2).validate(), std::invalid_argument);
  CHECK_THROWS_AS(cfg(2.0, 5, 0.01, 0.2).validate(), std::invalid_argument);
  CHECK_THROWS_AS(cfg(0.1, 0, 0.01, 0.2).validate(), std::invalid_argument);
  CHECK_THROWS_AS(cfg(0.1, 5, -1.0, 0.2).validate(), std::invalid_argument);
  CHECK_THROWS_AS(cfg(0.1, 5, 0.01, -0.2).validate(), std::invalid_argument);
}
