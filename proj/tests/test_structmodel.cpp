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

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "certrl/envs.hpp"
#include "certrl/learners.hpp"
#include "certrl/structmodel.hpp"
#include "doctest.h"

using namespace certrl;

namespace {

const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
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

std::size_t block_index(const StructuredModel& m, std::size_t i, ModelBlock b) {
  for (std::size_t k = 0; k < m.filter(i).dict.num_kernels(); ++k) {
    if (m.block_of(i, k) == b) return k;
  }
  FAIL("block missing");
  return 0;
}

StructuredModel one_sigma_model(std::size_t n_x, std::size_t n_u, const ApfbsConfig& c, std::size_t r_max = 300) {
  const std::vector<double> sigma{1.0};
  return StructuredModel::uniform(n_x, n_u, default_block_kernels(n_x, n_u, sigma), c, r_max);
}

}  // namespace

TEST_CASE("empty models predict zero and extract zero") {
  const auto m = one_sigma_model(2, 1, cfg(0.1, 5, 0.0, 0.0));
  const std::vector<double> x{0.3, -0.2}, u{0.7};
  const auto d = predict_delta(m, x, u);
  CHECK(d == std::vector<double>{0.0, 0.0});
  const auto a = extract_affine(m, x);
  CHECK(a.f_hat.isZero());
  CHECK(a.g_hat.isZero());
  const auto r = sparsity_report(m);
  for (const auto& row : r.mass) CHECK(row == std::array<double, 3>{0.0, 0.0, 0.0});
  CHECK_THROWS(predict_delta(m, std::vector<double>{0.0}, u));
}

TEST_CASE("single-atom block contributions") {
  auto m = one_sigma_model(1, 1, cfg(0.1, 5, 0.0, 0.0));
  const std::size_t g = block_index(m, 0, ModelBlock::g), f = block_index(m, 0, ModelBlock::f);
  const std::vector<double> xc{0.4}, uc{1.5};

  auto mg = m;
  mg.filter(0).append_atom(g, mg.join(xc, uc), 1.0);
  CHECK(predict_delta(mg, xc, std::vector<double>{0.0})[0] == 0.0);
  // g column at x: c * kx(x, xc) * (uc . e_1)
  const std::vector<double> x{0.1};
  const double kx = kInvSqrt2Pi * std::exp(-0.5 * 0.3 * 0.3);
  CHECK(extract_affine(mg, x).g_hat(0, 0) == doctest::Approx(kx * 1.5).epsilon(1e-12));

  auto mf = m;
  mf.filter(0).append_atom(f, mf.join(xc, uc), 1.0);
  CHECK(predict_delta(mf, xc, std::vector<double>{0.0})[0] == doctest::Approx(0.1 * kInvSqrt2Pi).epsilon(1e-12));
  // The f-block ignores u.
  CHECK(predict_delta(mf, xc, std::vector<double>{-3.0})[0] == predict_delta(mf, xc, std::vector<double>{0.0})[0]);
}

TEST_CASE("single exact update lands on the target") {
  auto m = one_sigma_model(2, 2, cfg(1.0, 1, 0.0, 0.0));
  const std::vector<double> x{0.2, -0.4}, u{0.5, 0.1}, xn{0.5, -0.3};
  m = update_structured(m, x, u, xn);
  const auto d = predict_delta(m, x, u);
  CHECK(d[0] == doctest::Approx(0.3).epsilon(1e-10));
  CHECK(d[1] == doctest::Approx(0.1).epsilon(1e-10));
}

TEST_CASE("an overwhelming l1 weight annihilates every coefficient") {
  auto m = one_sigma_model(1, 1, cfg(1.0, 1, 100.0, 0.0));
  std::mt19937_64 rng(3);
  for (int n = 0; n < 50; ++n) {
    const auto x = draw(rng, 1), u = draw(rng, 1);
    m = update_structured(m, x, u, std::vector<double>{x[0] + 0.5 * u[0]});
  }
  for (double h : m.filter(0).flat_coefficients()) CHECK(h == 0.0);
}

TEST_CASE("affine consistency identity on trained models") {
  std::mt19937_64 rng(12);
  const std::vector<double> sigmas{2.0, 1.0, 0.5};
  auto m = StructuredModel::uniform(2, 2, default_block_kernels(2, 2, sigmas), cfg(0.3, 5, 1e-3, 0.01), 200);
  for (int n = 0; n < 400; ++n) {
    const auto x = draw(rng, 2), u = draw(rng, 2);
    const std::vector<double> xn{x[0] + std::sin(x[1]) * u[0] + 0.1 * x[0] * x[0], x[1] + u[1] * u[0]};
    m = update_structured(m, x, u, xn);
  }
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto x = draw(rng, 2), u = draw(rng, 2);
    const auto d = predict_delta(m, x, u);
    const auto a = extract_affine(m, x);
    const Eigen::Vector2d uu(u[0], u[1]);
    const auto z = m.join(x, u);
    const Eigen::Vector2d lin = a.f_hat + a.g_hat * uu;
    for (int i = 0; i < 2; ++i) {
      const double p = m.block_predict(static_cast<std::size_t>(i), ModelBlock::p, z);
      worst = std::max(worst, std::fabs(d[static_cast<std::size_t>(i)] - p - lin(i)));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("sparsity report sums block masses") {
  auto m = one_sigma_model(1, 1, cfg(0.1, 5, 0.0, 0.0));
  const std::vector<double> z{0.0, 0.0};
  m.filter(0).append_atom(block_index(m, 0, ModelBlock::p), z, -0.25);
  m.filter(0).append_atom(block_index(m, 0, ModelBlock::g), z, 2.0);
  m.filter(0).append_atom(block_index(m, 0, ModelBlock::g), z, -1.0);
  m.filter(0).append_atom(block_index(m, 0, ModelBlock::f), z, 0.5);
  const auto r = sparsity_report(m);
  CHECK(r.total_mass(ModelBlock::p) == 0.25);
  CHECK(r.total_mass(ModelBlock::f) == 0.5);
  CHECK(r.total_mass(ModelBlock::g) == 3.0);
  CHECK(r.p_over_g() == doctest::Approx(0.25 / 3.0));
  CHECK(r.atoms[0][static_cast<int>(ModelBlock::g)] == 2);
}

TEST_CASE("control-affine data leaves the p-block nearly empty, non-affine data does not") {
  std::mt19937_64 rng(5);
  const std::vector<double> sigmas{2.0, 1.0, 0.5};
  const ApfbsConfig c = cfg(0.3, 5, 1e-3, 0.01, 0.1);
  auto affine = StructuredModel::uniform(1, 1, default_block_kernels(1, 1, sigmas), c, 300);
  auto nonaffine = affine;
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  for (int n = 0; n < 2000; ++n) {
    const std::vector<double> x{d(rng)}, u{d(rng)};
    affine = update_structured(affine, x, u, std::vector<double>{x[0] + std::cos(x[0]) * u[0]});
    nonaffine = update_structured(nonaffine, x, u, std::vector<double>{x[0] + std::sin(x[0] * u[0])});
  }
  const double ra = sparsity_report(affine).p_over_g(), rn = sparsity_report(nonaffine).p_over_g();
  MESSAGE("affine p/g=" << ra << " non-affine p/g=" << rn);
  CHECK(ra < rn);
  CHECK(ra <= 0.05);
}

TEST_CASE("model json round-trip") {
  std::mt19937_64 rng(6);
  auto m = one_sigma_model(2, 1, cfg(0.3, 3, 0.0, 0.0));
  for (int n = 0; n < 20; ++n) {
    const auto x = draw(rng, 2), u = draw(rng, 1);
    m = update_structured(m, x, u, std::vector<double>{x[0] + u[0], x[1] - u[0]});
  }
  const auto back = StructuredModel::from_json(m.to_json());
  const auto x = draw(rng, 2), u = draw(rng, 1);
  const auto a = predict_delta(m, x, u), b = predict_delta(back, x, u);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-13));
  CHECK(a[1] == doctest::Approx(b[1]).epsilon(1e-13));
}

TEST_CASE("parametric projection update") {
  const double dt = 0.02;
  const auto basis = quadrotor_basis(dt);
  const Eigen::Vector3d nominal = QuadrotorEnv::nominal();
  const Eigen::Vector3d switched(1.0, 9.81, 5.0 / 0.027);

  SUBCASE("unit step matches the observation") {
    ParametricModel pm(basis, nominal, 1.0);
    const std::vector<double> x{0.5, -0.2};
    const double u = -0.3;
    const Eigen::VectorXd xn = quadrotor_step(switched, dt, x, u);
    const auto rep = parametric_update(pm, x, std::vector<double>{u}, std::vector<double>(xn.data(), xn.data() + 2));
    CHECK_FALSE(rep.skipped);
    CHECK((pm.predict(x, std::vector<double>{u}) - xn).norm() <= 1e-10);
  }
  SUBCASE("consistent parameters are a fixed point") {
    ParametricModel pm(basis, switched, 0.6);
    const std::vector<double> x{0.1, 0.4};
    const Eigen::VectorXd xn = quadrotor_step(switched, dt, x, -0.2);
    parametric_update(pm, x, std::vector<double>{-0.2}, std::vector<double>(xn.data(), xn.data() + 2));
    CHECK((pm.coefficients() - switched).norm() <= 1e-12);
  }
  SUBCASE("strictly monotone toward the switched parameters") {
    ParametricModel pm(basis, nominal, 0.6);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> ux(-3.0, 3.0), uu(-QuadrotorEnv::max_input(), 0.0);
    double prev = (pm.coefficients() - switched).norm();
    for (int n = 0; n < 2000; ++n) {
      const std::vector<double> x{ux(rng), ux(rng)};
      const double u = uu(rng);
      const Eigen::VectorXd xn = quadrotor_step(switched, dt, x, u);
      const auto rep = parametric_update(pm, x, std::vector<double>{u}, std::vector<double>(xn.data(), xn.data() + 2));
      const double d = (pm.coefficients() - switched).norm();
      if (!rep.skipped && rep.residual_norm > 0.0) CHECK(d < prev);
      CHECK(d <= prev + 1e-12);
      prev = d;
    }
  }
  SUBCASE("ill-conditioned basis is skipped") {
    const ParametricModel::Basis rank_one = [](std::span<const double>, std::span<const double>) {
      Eigen::MatrixXd b(2, 2);
      b << 1.0, 2.0, 2.0, 4.0;
      return b;
    };
    ParametricModel pm(rank_one, Eigen::Vector2d(0.0, 0.0), 1.0);
    const auto rep = parametric_update(pm, std::vector<double>{0.0}, std::vector<double>{0.0}, std::vector<double>{1.0, 0.0});
    CHECK(rep.skipped);
    CHECK(pm.coefficients().isZero());
  }
}

TEST_CASE("structured learner input scaling keeps raw-unit predictions consistent") {
  std::mt19937_64 rng(14);
  const std::vector<double> sigmas{1.0};
  const auto base = StructuredModel::uniform(1, 2, default_block_kernels(1, 2, sigmas), cfg(0.5, 3, 0.0, 0.0), 100);
  const Eigen::Vector2d scale(0.5, 4.0);
  StructuredLearner scaled(base, scale);
  CHECK(scaled.input_scale() == scale);
  for (int n = 0; n < 30; ++n) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, draw(rng, 1)[0]);
    const Eigen::Vector2d u(draw(rng, 1)[0], draw(rng, 1)[0]);
    scaled.update(x, u, x + Eigen::VectorXd::Constant(1, 0.3 * u(0) - 0.2 * u(1)));
  }
  // The learner's affine part in raw units equals the model's structured prediction on scaled inputs.
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, draw(rng, 1)[0]);
    const Eigen::Vector2d u(draw(rng, 1)[0], draw(rng, 1)[0]);
    const auto a = scaled.affine(x);
    const Eigen::Vector2d su = scale.cwiseProduct(u);
    const auto d = predict_delta(scaled.model(), std::vector<double>{x(0)}, std::vector<double>{su(0), su(1)});
    const double p = scaled.model().block_predict(0, ModelBlock::p, std::vector<double>{x(0), su(0), su(1)});
    CHECK((a.f_hat + a.g_hat * u)(0) == doctest::Approx(d[0] - p).epsilon(1e-10));
  }
  CHECK_THROWS(StructuredLearner(base, Eigen::Vector2d(1.0, 0.0)));
  CHECK_THROWS(StructuredLearner(base, Eigen::VectorXd::Ones(3)));
  CHECK_THROWS(StructuredLearner(base, {}, {4}));
}

TEST_CASE("structured learner wraps angular deltas") {
  const std::vector<double> sigmas{1.0};
  const auto base = StructuredModel::uniform(1, 1, default_block_kernels(1, 1, sigmas), cfg(1.0, 1, 0.0, 0.0), 100);
  StructuredLearner wrapped(base, {}, {0});
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 3.1);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.5);
  // Crossing +pi: the raw difference is about -6.18, the wrapped one about +0.1.
  const Eigen::VectorXd xn = Eigen::VectorXd::Constant(1, wrap_angle(3.1 + 0.1));
  wrapped.update(x, u, xn);
  const auto d = predict_delta(wrapped.model(), std::vector<double>{3.1}, std::vector<double>{0.5});
  CHECK(d[0] == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("affine split of a parametric basis") {
  const auto basis = quadrotor_basis(0.02);
  const Eigen::Vector3d h = QuadrotorEnv::nominal();
  const Eigen::Vector2d x(0.4, -1.0);
  const auto a = affine_from_basis(basis, h, x, 1);
  QuadrotorEnv env(h);
  const auto exact = env.exact_affine(x);
  CHECK((a.f_hat - exact.f_hat).norm() <= 1e-12);
  CHECK((a.g_hat - exact.g_hat).norm() <= 1e-12);
}
