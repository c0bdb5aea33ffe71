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
#include <stdexcept>
#include <vector>

#include "certrl/envs.hpp"
#include "doctest.h"

using namespace certrl;

TEST_CASE("quadrotor step from rest at nominal parameters") {
  const auto xn = quadrotor_step(QuadrotorEnv::nominal(), 0.02, std::vector<double>{0.0, 0.0}, 0.0);
  CHECK(xn(0) == doctest::Approx(-0.0019620).epsilon(1e-9));
  CHECK(xn(1) == doctest::Approx(-0.19620).epsilon(1e-9));
}

TEST_CASE("quadrotor step is affine in u and linear in the parameters") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  const double dt = 0.02;
  const Eigen::Vector2d b(-dt * dt / 2.0, -dt);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Vector3d h(d(rng), d(rng), d(rng)), h2(d(rng), d(rng), d(rng));
    const std::vector<double> x{d(rng), d(rng)};
    const double u1 = d(rng), u2 = d(rng);
    const Eigen::VectorXd diff = quadrotor_step(h, dt, x, u1) - quadrotor_step(h, dt, x, u2);
    CHECK((diff - h(2) * (u1 - u2) * b).norm() <= 1e-12);
    const Eigen::VectorXd sum = quadrotor_step(h + h2, dt, x, u1);
    CHECK((sum - quadrotor_step(h, dt, x, u1) - quadrotor_step(h2, dt, x, u1)).norm() <= 1e-12);
  }
}

TEST_CASE("quadrotor schedule") {
  QuadrotorEnv env;
  env.add_switch({1000, Eigen::Vector3d(1.0, 9.81, 5.0 / 0.027)});
  for (std::size_t s : {11000u, 12000u, 13000u, 14000u}) env.add_relocation({s, Eigen::VectorXd(), -3.0, 3.0});
  std::mt19937_64 rng(2);
  const Eigen::Vector2d x(0.5, 0.1);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, -0.3);
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd before = env.transition(x, u) - env.transition(x, u0);

  CHECK_FALSE(env.apply_schedule(999, rng).switched);
  CHECK(env.params() == QuadrotorEnv::nominal());
  CHECK(env.apply_schedule(1000, rng).switched);
  CHECK(env.params()(2) == doctest::Approx(5.0 / 0.027));
  const Eigen::VectorXd after = env.transition(x, u) - env.transition(x, u0);
  CHECK((after - 5.0 * before).norm() <= 1e-12);

  env.set_state(Eigen::Vector2d(0.0, 0.0));
  for (std::size_t n = 10990; n < 14010; ++n) {
    const auto ev = env.apply_schedule(n, rng);
    const bool expected = n == 11000 || n == 12000 || n == 13000 || n == 14000;
    CHECK(ev.relocated == expected);
    if (ev.relocated) {
      CHECK(std::fabs(env.state()(0)) <= 3.0);
      CHECK(env.state()(1) == 0.0);
    }
  }

  QuadrotorEnv plain;
  const Eigen::Vector3d h = plain.params();
  for (std::size_t n = 0; n < 100; ++n) CHECK_FALSE(plain.apply_schedule(n, rng).switched);
  CHECK(plain.params() == h);
}

TEST_CASE("quadrotor input box and exact affine split") {
  QuadrotorEnv env;
  const auto box = env.box();
  CHECK(box.lo(0) == doctest::Approx(-2.0 * 0.027 * 9.81));
  CHECK(box.hi(0) == 0.0);
  const Eigen::Vector2d x(1.0, -0.5);
  const Eigen::VectorXd big = Eigen::VectorXd::Constant(1, -10.0);
  CHECK(env.transition(x, big) == env.transition(x, box.lo));
  const auto a = env.exact_affine(x);
  const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, -0.2);
  CHECK((x + a.f_hat + a.g_hat * u - env.transition(x, u)).norm() <= 1e-12);
  CHECK(env.true_parameters().has_value());
}

TEST_CASE("unicycle kinematics") {
  const double kv = 0.5, kw = 2.0, dt = 0.3, c = 0.4;
  const std::vector<double> origin{0.2, -0.1, 0.0};
  const auto still = unicycle_step(kv, kw, dt, origin, std::vector<double>{0.0, 0.0});
  CHECK(still(0) == 0.2);
  CHECK(still(1) == -0.1);
  CHECK(still(2) == 0.0);

  const auto fwd = unicycle_step(kv, kw, dt, origin, std::vector<double>{c, c});
  CHECK(fwd(0) - 0.2 == doctest::Approx(kv * c * dt));
  CHECK(fwd(1) == doctest::Approx(-0.1));
  CHECK(fwd(2) == 0.0);

  const auto turn = unicycle_step(kv, kw, dt, origin, std::vector<double>{c, 0.0});
  CHECK(turn(2) == doctest::Approx(kw * c * dt));
  CHECK(turn(2) > 0.0);

  // Heading stays wrapped.
  const auto wrapped = unicycle_step(kv, kw, dt, std::vector<double>{0.0, 0.0, 3.1}, std::vector<double>{0.6, 0.0});
  CHECK(std::fabs(wrapped(2)) <= std::numbers::pi);
}

TEST_CASE("unicycle is exactly control affine without drift") {
  UnicycleEnv env;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1.0, 1.0), th(-3.0, 3.0), uu(0.0, 0.623);
  for (int t = 0; t < 100; ++t) {
    const Eigen::Vector3d x(d(rng), d(rng), th(rng));
    const Eigen::Vector2d u(uu(rng), uu(rng));
    const auto a = env.exact_affine(x);
    CHECK(a.f_hat.isZero());
    Eigen::VectorXd step = env.transition(x, u) - x;
    step(2) = wrap_angle(step(2));
    CHECK((a.g_hat * u - step).norm() <= 1e-12);
  }
  CHECK(env.box().lo.isZero());
  CHECK(env.angular_dims() == std::vector<std::size_t>{2});
  const auto inward = env.turn_inward(Eigen::Vector3d(1.0, 0.0, 0.0));
  REQUIRE(inward.has_value());
  CHECK(env.box().contains(*inward));
}

TEST_CASE("rewards") {
  const auto q = quadrotor_reward();
  CHECK(reward_eval(q, std::vector<double>{0.0, 0.0}, std::vector<double>{0.0}) == 12.0);
  CHECK(reward_eval(q, std::vector<double>{3.0, 0.0}, std::vector<double>{0.0}) == -6.0);
  CHECK(reward_eval(q, std::vector<double>{0.0, 2.0}, std::vector<double>{0.0}) == 10.0);
  const auto u = unicycle_reward();
  CHECK(reward_eval(u, std::vector<double>{0.0, 0.0, 1.0}, std::vector<double>{0.0, 0.0}) == 2.0);
  CHECK(reward_eval(u, std::vector<double>{1.0, 1.0, 0.0}, std::vector<double>{0.0, 0.0}) == 0.0);
}

TEST_CASE("identical seeds and schedules give identical trajectories") {
  const nlohmann::json cfg = {{"kind", "quadrotor"},
                              {"initial_state", {0.5, 0.0}},
                              {"switches", {{{"step", 5}, {"params", {1.0, 9.81, 40.0}}}}},
                              {"relocations", {{{"step", 7}}}}};
  auto a = make_environment(cfg), b = make_environment(cfg);
  std::mt19937_64 ra(9), rb(9);
  for (std::size_t n = 0; n < 50; ++n) {
    a->apply_schedule(n, ra);
    b->apply_schedule(n, rb);
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, -0.01 * static_cast<double>(n % 5));
    REQUIRE(a->step(u) == b->step(u));
  }
  auto c = a->clone();
  CHECK(c->state() == a->state());
}

TEST_CASE("environment factory") {
  CHECK(make_environment({{"kind", "unicycle"}})->name() == "unicycle");
  CHECK(make_environment({{"kind", "quadrotor"}, {"input_box", {0.0, 0.5}}})->box().hi(0) == 0.5);
  CHECK_THROWS_AS(make_environment({{"kind", "boat"}}), std::invalid_argument);
  CHECK_THROWS_AS(make_environment({{"kind", "quadrotor"}, {"params", {1.0, 2.0}}}), std::invalid_argument);
}
