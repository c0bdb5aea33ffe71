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
#include <optional>
#include <random>
#include <vector>

#include "certrl/envs.hpp"
#include "certrl/gpbaseline.hpp"
#include "certrl/structmodel.hpp"
#include "certrl_verify/oracles.hpp"
#include "doctest.h"

using namespace certrl;

namespace {

GpSarsaState random_state(std::mt19937_64& rng, std::size_t n, double gamma, std::size_t dim = 2) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  GpSarsaState st{KernelSpec::gaussian(0.5 + unit(rng), dim), gamma, {}, {}, {}, std::nullopt};
  const auto draw = [&] {
    std::vector<double> z(dim);
    for (auto& v : z) v = normal(rng);
    return z;
  };
  st.z.push_back(draw());
  for (std::size_t i = 0; i < n; ++i) st.observe(draw(), normal(rng), 1e-3 + 0.05 * unit(rng));
  return st;
}

}  // namespace

TEST_CASE("difference matrix structure") {
  const Eigen::MatrixXd h = difference_matrix(5, 0.9);
  REQUIRE(h.rows() == 5);
  REQUIRE(h.cols() == 6);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK((h.row(i).array() != 0.0).count() == 2);
    CHECK(h(i, i) == 1.0);
    CHECK(h(i, i + 1) == -0.9);
  }
}

TEST_CASE("one transition without discount is plain GP regression") {
  const auto k = KernelSpec::gaussian(1.0, 1);
  GpSarsaState st{k, 1e-300, {{0.0}}, {}, {}, std::nullopt};
  st.observe({5.0}, 2.0, 0.1);
  const std::vector<double> q{0.4};
  const double k0q = eval_kernel(k, st.z[0], q), k00 = eval_kernel(k, st.z[0], st.z[0]);
  const auto p = gp_sarsa_posterior(st, q);
  CHECK(p.mean == doctest::Approx(k0q * 2.0 / (k00 + 0.1)).epsilon(1e-9));
  CHECK(p.variance == doctest::Approx(eval_kernel(k, q, q) - k0q * k0q / (k00 + 0.1)).epsilon(1e-9));
}

TEST_CASE("zero rewards give a zero mean") {
  std::mt19937_64 rng(1);
  auto st = random_state(rng, 10, 0.9);
  for (auto& r : st.rewards) r = 0.0;
  CHECK(gp_sarsa_posterior(st, std::vector<double>{0.1, 0.2}).mean == 0.0);
  CHECK(psi_route_posterior(st, std::vector<double>{0.1, 0.2}).mean == doctest::Approx(0.0));
}

TEST_CASE("both posterior routes and the dense oracle agree") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  for (int d = 0; d < 30; ++d) {
    const double gamma = std::vector<double>{0.5, 0.9, 0.99}[static_cast<std::size_t>(d % 3)];
    const auto st = random_state(rng, 1 + static_cast<std::size_t>(d), gamma);
    for (int q = 0; q < 10; ++q) {
      const std::vector<double> z{normal(rng), normal(rng)};
      const auto a = gp_sarsa_posterior(st, z), b = psi_route_posterior(st, z), o = oracle::gp_sarsa_dense(st, z);
      CHECK(std::fabs(a.mean - b.mean) <= 1e-8);
      CHECK(std::fabs(a.variance - b.variance) <= 1e-8);
      CHECK(std::fabs(a.mean - o.mean) <= 1e-8);
      CHECK(a.variance >= -1e-10);
      CHECK(a.variance <= eval_kernel(st.kernel, z, z) + 1e-10);
    }
  }
}

TEST_CASE("frozen basis") {
  std::mt19937_64 rng(3);
  const auto st = random_state(rng, 12, 0.9);
  const std::vector<double> q{0.3, -0.1};
  const auto full = gp_sarsa_posterior(st, q);
  const auto same = gp_sarsa_posterior(gp_sarsa2_mode(st, 13), q);
  CHECK(same.mean == doctest::Approx(full.mean).epsilon(1e-9));
  CHECK(same.variance == doctest::Approx(full.variance).epsilon(1e-9));
  CHECK(gp_sarsa_posterior(gp_sarsa2_mode(st, 0), q).mean == 0.0);

  GpSarsaOnline online(KernelSpec::gaussian(1.0, 2), 0.9, 1e-6, 600, 600, 100);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 900; ++i) {
    online.observe(std::vector<double>{normal(rng), normal(rng)}, std::vector<double>{normal(rng), normal(rng)}, 1.0);
  }
  CHECK(online.basis_size() <= 600);
}

TEST_CASE("streaming GP tracks a constant reward") {
  // Constant reward 1 with z = z': Q = 1 / (1 - gamma) everywhere on the data.
  GpSarsaOnline gp(KernelSpec::gaussian(2.0, 1), 0.5, 1e-4, 200, std::nullopt, 10);
  for (int i = 0; i < 200; ++i) {
    const double x = -1.0 + 0.01 * i;
    gp.observe(std::vector<double>{x}, std::vector<double>{x}, 1.0);
  }
  CHECK(gp.predict_difference(std::vector<double>{0.2}, std::vector<double>{0.2}) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("bayesian linear regression") {
  const auto basis = quadrotor_basis(0.02);
  const Eigen::Vector3d nominal = QuadrotorEnv::nominal();

  SUBCASE("no data keeps the prior") {
    BayesLinearState s(nominal, 25.0 * Eigen::Matrix3d::Identity(), 0.01);
    CHECK((s.mean() - nominal).norm() <= 1e-12);
    CHECK((s.covariance() - 25.0 * Eigen::Matrix3d::Identity()).norm() <= 1e-9);
  }
  SUBCASE("huge noise barely moves the mean") {
    BayesLinearState s(nominal, 25.0 * Eigen::Matrix3d::Identity(), 1e12);
    const std::vector<double> x{0.3, 0.1};
    s = bayes_linear_update(s, basis(x, std::vector<double>{-0.2}), std::vector<double>{5.0, 5.0});
    CHECK((s.mean() - nominal).norm() <= 1e-6);
  }
  SUBCASE("consistent data converges, then lags after a switch") {
    BayesLinearState s(nominal, 25.0 * Eigen::Matrix3d::Identity(), 0.01);
    ParametricModel adaptive(basis, nominal, 0.6);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ux(-3.0, 3.0), uu(-QuadrotorEnv::max_input(), 0.0);
    // Data generated by the nominal parameters keeps the posterior there.
    for (int n = 0; n < 1000; ++n) {
      const std::vector<double> x{ux(rng), ux(rng)}, u{uu(rng)};
      const Eigen::VectorXd xn = quadrotor_step(nominal, 0.02, x, u[0]);
      s = bayes_linear_update(s, basis(x, u), std::vector<double>(xn.data(), xn.data() + 2));
    }
    CHECK((s.mean() - nominal).norm() <= 1e-3);
    CHECK(s.observations() == 1000);

    const Eigen::Vector3d switched(1.0, 9.81, 5.0 / 0.027);
    adaptive.set_coefficients(s.mean());
    for (int n = 0; n < 9000; ++n) {
      const std::vector<double> x{ux(rng), ux(rng)}, u{uu(rng)};
      const Eigen::VectorXd xn = quadrotor_step(switched, 0.02, x, u[0]);
      const std::vector<double> obs(xn.data(), xn.data() + 2);
      s = bayes_linear_update(s, basis(x, u), obs);
      parametric_update(adaptive, x, u, obs);
    }
    const double bayes = (s.mean() - switched).norm(), proj = (adaptive.coefficients() - switched).norm();
    MESSAGE("bayes=" << bayes << " adaptive=" << proj);
    CHECK(bayes >= 10.0 * proj);
  }
}

TEST_CASE("robust cholesky escalates jitter on a singular matrix") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(3, 3);
  const auto llt = robust_cholesky(a);
  CHECK(llt.info() == Eigen::Success);
  const Eigen::MatrixXd l = llt.matrixL();
  CHECK((l * l.transpose() - a).norm() <= 1e-5);
}
