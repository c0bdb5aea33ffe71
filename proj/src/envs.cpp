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

#include "certrl/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace certrl {

double reward_eval(const RewardSpec& spec, std::span<const double> x, std::span<const double> u) {
  return spec.eval(x, u);
}

RewardSpec quadrotor_reward() {
  return {"quadrotor", [](std::span<const double> x, std::span<const double>) {
            return -2.0 * x[0] * x[0] - 0.5 * x[1] * x[1] + 12.0;
          },
          12.0};
}

RewardSpec unicycle_reward() {
  return {"unicycle", [](std::span<const double> x, std::span<const double>) {
            return -(x[0] * x[0] + x[1] * x[1]) + 2.0;
          },
          2.0};
}

void Environment::set_state(Eigen::VectorXd x) {
  if (x.size() != static_cast<Eigen::Index>(state_dim())) throw std::invalid_argument(name() + ": state length mismatch");
  x_ = std::move(x);
}

Eigen::VectorXd Environment::step(const Eigen::VectorXd& u) {
  x_ = transition(x_, u);
  return x_;
}

QuadrotorEnv::QuadrotorEnv(Eigen::Vector3d params, double dt) : h_(std::move(params)), dt_(dt), reward_(quadrotor_reward()) {
  if (!(dt > 0.0)) throw std::invalid_argument("quadrotor: dt must be positive");
  set_box(-max_input(), 0.0);
  x_ = Eigen::Vector2d::Zero();
}

void QuadrotorEnv::set_box(double lo, double hi) {
  box_.lo = Eigen::VectorXd::Constant(1, lo);
  box_.hi = Eigen::VectorXd::Constant(1, hi);
  box_.validate();
}

Eigen::VectorXd quadrotor_step(const Eigen::Vector3d& h, double dt, std::span<const double> x, double u) {
  const double b0 = -0.5 * dt * dt, b1 = -dt;
  Eigen::VectorXd out(2);
  out(0) = h(0) * (x[0] + dt * x[1]) + h(1) * b0 + h(2) * b0 * u;
  out(1) = h(0) * x[1] + h(1) * b1 + h(2) * b1 * u;
  return out;
}

ParametricModel::Basis quadrotor_basis(double dt) {
  return [dt](std::span<const double> x, std::span<const double> u) {
    const double b0 = -0.5 * dt * dt, b1 = -dt;
    Eigen::MatrixXd xi(2, 3);
    xi << x[0] + dt * x[1], b0, b0 * u[0],  //
        x[1], b1, b1 * u[0];
    return xi;
  };
}

Eigen::VectorXd QuadrotorEnv::transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (x.size() != 2 || u.size() != 1) throw std::invalid_argument("quadrotor: expected state [x; xdot] and scalar input");
  const double uc = std::clamp(u(0), box_.lo(0), box_.hi(0));
  return quadrotor_step(h_, dt_, {x.data(), 2}, uc);
}

AffineExtract QuadrotorEnv::exact_affine(const Eigen::VectorXd& x) const {
  AffineExtract a;
  const Eigen::VectorXd x0 = quadrotor_step(h_, dt_, {x.data(), 2}, 0.0);
  a.f_hat = x0 - x;
  a.g_hat.resize(2, 1);
  a.g_hat << h_(2) * -0.5 * dt_ * dt_, h_(2) * -dt_;
  return a;
}

ScheduleEvents QuadrotorEnv::apply_schedule(std::size_t n, std::mt19937_64& rng) {
  ScheduleEvents ev;
  for (const auto& s : switches_) {
    if (s.step == n) {
      h_ = s.params;
      ev.switched = true;
    }
  }
  for (const auto& r : relocations_) {
    if (r.step != n) continue;
    if (r.state.size() == 2) {
      x_ = r.state;
    } else {
      std::uniform_real_distribution<double> pos(r.lo, r.hi);
      x_ = Eigen::Vector2d(pos(rng), 0.0);
    }
    ev.relocated = true;
  }
  return ev;
}

UnicycleEnv::UnicycleEnv(double k_v, double k_w, double dt, double u_max)
    : k_v_(k_v), k_w_(k_w), dt_(dt), reward_(unicycle_reward()) {
  if (!(dt > 0.0)) throw std::invalid_argument("unicycle: dt must be positive");
  if (!(u_max > 0.0)) throw std::invalid_argument("unicycle: u_max must be positive");
  box_.lo = Eigen::VectorXd::Zero(2);
  box_.hi = Eigen::VectorXd::Constant(2, u_max);
  x_ = Eigen::Vector3d::Zero();
}

Eigen::VectorXd unicycle_step(double k_v, double k_w, double dt, std::span<const double> x,
                              std::span<const double> u) {
  Eigen::VectorXd out(3);
  const double v = k_v * 0.5 * (u[0] + u[1]);
  out(0) = x[0] + v * std::cos(x[2]) * dt;
  out(1) = x[1] + v * std::sin(x[2]) * dt;
  out(2) = wrap_angle(x[2] + k_w * (u[0] - u[1]) * dt);
  return out;
}

Eigen::VectorXd UnicycleEnv::transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  if (x.size() != 3 || u.size() != 2) throw std::invalid_argument("unicycle: expected state [x; y; theta] and two inputs");
  const Eigen::VectorXd uc = box_.clamp(u);
  return unicycle_step(k_v_, k_w_, dt_, {x.data(), 3}, {uc.data(), 2});
}

AffineExtract UnicycleEnv::exact_affine(const Eigen::VectorXd& x) const {
  AffineExtract a;
  a.f_hat = Eigen::VectorXd::Zero(3);
  a.g_hat.resize(3, 2);
  const double c = 0.5 * k_v_ * dt_ * std::cos(x(2)), s = 0.5 * k_v_ * dt_ * std::sin(x(2));
  a.g_hat << c, c, s, s, k_w_ * dt_, -k_w_ * dt_;
  return a;
}

std::optional<Eigen::VectorXd> UnicycleEnv::turn_inward(const Eigen::VectorXd& x) const {
  const double d = wrap_angle(std::atan2(-x(1), -x(0)) - x(2));
  const double u_max = box_.hi(0);
  if (std::fabs(d) < 0.3) return Eigen::VectorXd(Eigen::Vector2d(u_max, u_max));
  return d > 0.0 ? Eigen::VectorXd(Eigen::Vector2d(u_max, 0.0)) : Eigen::VectorXd(Eigen::Vector2d(0.0, u_max));
}

std::unique_ptr<Environment> make_environment(const nlohmann::json& cfg) {
  const std::string kind = cfg.value("kind", std::string("quadrotor"));
  if (kind == "quadrotor") {
    Eigen::Vector3d h = QuadrotorEnv::nominal();
    if (cfg.contains("params")) {
      const auto p = cfg.at("params").get<std::vector<double>>();
      if (p.size() != 3) throw std::invalid_argument("quadrotor: params must have 3 entries");
      h = Eigen::Vector3d(p[0], p[1], p[2]);
    }
    auto env = std::make_unique<QuadrotorEnv>(h, cfg.value("dt", 0.02));
    if (cfg.contains("input_box")) {
      const auto b = cfg.at("input_box").get<std::vector<double>>();
      if (b.size() != 2) throw std::invalid_argument("quadrotor: input_box must be [lo, hi]");
      env->set_box(b[0], b[1]);
    }
    for (const auto& s : cfg.value("switches", nlohmann::json::array())) {
      const auto p = s.at("params").get<std::vector<double>>();
      if (p.size() != 3) throw std::invalid_argument("quadrotor: switch params must have 3 entries");
      env->add_switch({s.at("step").get<std::size_t>(), Eigen::Vector3d(p[0], p[1], p[2])});
    }
    for (const auto& r : cfg.value("relocations", nlohmann::json::array())) {
      Relocation rel{r.at("step").get<std::size_t>(), Eigen::VectorXd(), r.value("lo", -3.0), r.value("hi", 3.0)};
      if (r.contains("state")) {
        const auto st = r.at("state").get<std::vector<double>>();
        rel.state = Eigen::Map<const Eigen::VectorXd>(st.data(), static_cast<Eigen::Index>(st.size()));
      }
      env->add_relocation(std::move(rel));
    }
    if (cfg.contains("initial_state")) {
      const auto st = cfg.at("initial_state").get<std::vector<double>>();
      env->set_state(Eigen::Map<const Eigen::VectorXd>(st.data(), static_cast<Eigen::Index>(st.size())));
    }
    return env;
  }
  if (kind == "unicycle") {
    auto env = std::make_unique<UnicycleEnv>(cfg.value("k_v", 0.5), cfg.value("k_w", 2.0), cfg.value("dt", 0.3),
                                             cfg.value("u_max", 0.623));
    if (cfg.contains("initial_state")) {
      const auto st = cfg.at("initial_state").get<std::vector<double>>();
      env->set_state(Eigen::Map<const Eigen::VectorXd>(st.data(), static_cast<Eigen::Index>(st.size())));
    }
    return env;
  }
  throw std::invalid_argument("unknown environment kind '" + kind + "'");
}

}  // namespace certrl
