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

// Deterministic simulation environments: vertical quadrotor with scheduled
// parameter switches and relocations, and a forward-only unicycle.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "certrl/barrier.hpp"
#include "certrl/structmodel.hpp"
#include "json.hpp"

namespace certrl {

struct RewardSpec {
  std::string name;
  std::function<double(std::span<const double>, std::span<const double>)> eval;
  double max_abs = 1.0;  // bound on |R| over the state box, used for truncation horizons
};

double reward_eval(const RewardSpec& spec, std::span<const double> x, std::span<const double> u);
// -2 x^2 - xdot^2 / 2 + 12
RewardSpec quadrotor_reward();
// -|[x; y]|^2 + 2
RewardSpec unicycle_reward();

struct ScheduleEvents {
  bool switched = false;
  bool relocated = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual InputBox box() const = 0;
  virtual const RewardSpec& reward() const = 0;

  const Eigen::VectorXd& state() const { return x_; }
  void set_state(Eigen::VectorXd x);

  // Next state from (x, u) under the current parameters; u is clamped to the box.
  virtual Eigen::VectorXd transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
  // Exact x_next - x = f(x) + g(x) u at the current parameters.
  virtual AffineExtract exact_affine(const Eigen::VectorXd& x) const = 0;
  // Applies switches and relocations scheduled for step n.
  virtual ScheduleEvents apply_schedule(std::size_t n, std::mt19937_64& rng) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  // True model parameters when the environment is parametric.
  virtual std::optional<Eigen::VectorXd> true_parameters() const { return std::nullopt; }
  // Input that steers back toward the interior, used to break deadlocks.
  virtual std::optional<Eigen::VectorXd> turn_inward(const Eigen::VectorXd&) const { return std::nullopt; }
  // State coordinates that are angles wrapped to [-pi, pi].
  virtual std::vector<std::size_t> angular_dims() const { return {}; }

  Eigen::VectorXd step(const Eigen::VectorXd& u);

 protected:
  Eigen::VectorXd x_;
};

struct ParameterSwitch {
  std::size_t step;
  Eigen::Vector3d params;
};

// Relocation to a fixed state, or (when state is empty) to a uniform position in [lo, hi] at rest.
struct Relocation {
  std::size_t step;
  Eigen::VectorXd state;
  double lo = -3.0;
  double hi = 3.0;
};

class QuadrotorEnv final : public Environment {
 public:
  static constexpr double kMass = 0.027;
  static constexpr double kGravity = 9.81;
  static double max_input() { return 2.0 * kMass * kGravity; }
  static Eigen::Vector3d nominal() { return {1.0, kGravity, 1.0 / kMass}; }

  // The default box is [-u_max, 0]: with the verbatim dynamics the input term shares the
  // gravity direction, so this range spans accelerations of -g to +g around hover.
  explicit QuadrotorEnv(Eigen::Vector3d params = nominal(), double dt = 0.02);

  std::string name() const override { return "quadrotor"; }
  std::size_t state_dim() const override { return 2; }
  std::size_t input_dim() const override { return 1; }
  InputBox box() const override { return box_; }
  const RewardSpec& reward() const override { return reward_; }

  const Eigen::Vector3d& params() const { return h_; }
  void set_params(const Eigen::Vector3d& h) { h_ = h; }
  double dt() const { return dt_; }
  void set_box(double lo, double hi);
  void add_switch(ParameterSwitch s) { switches_.push_back(std::move(s)); }
  void add_relocation(Relocation r) { relocations_.push_back(std::move(r)); }

  Eigen::VectorXd transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  AffineExtract exact_affine(const Eigen::VectorXd& x) const override;
  ScheduleEvents apply_schedule(std::size_t n, std::mt19937_64& rng) override;
  std::unique_ptr<Environment> clone() const override { return std::make_unique<QuadrotorEnv>(*this); }
  std::optional<Eigen::VectorXd> true_parameters() const override { return Eigen::VectorXd(h_); }

 private:
  Eigen::Vector3d h_;
  double dt_;
  InputBox box_;
  RewardSpec reward_;
  std::vector<ParameterSwitch> switches_;
  std::vector<Relocation> relocations_;
};

// Xi(x, u) = [A x, b, b u] with A = [[1, dt], [0, 1]] and b = [-dt^2 / 2; -dt].
ParametricModel::Basis quadrotor_basis(double dt);
// x_next = Xi(x, u) h; u is not clamped.
Eigen::VectorXd quadrotor_step(const Eigen::Vector3d& h, double dt, std::span<const double> x, double u);

class UnicycleEnv final : public Environment {
 public:
  UnicycleEnv(double k_v = 0.5, double k_w = 2.0, double dt = 0.3, double u_max = 0.623);

  std::string name() const override { return "unicycle"; }
  std::size_t state_dim() const override { return 3; }
  std::size_t input_dim() const override { return 2; }
  InputBox box() const override { return box_; }
  const RewardSpec& reward() const override { return reward_; }

  Eigen::VectorXd transition(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  AffineExtract exact_affine(const Eigen::VectorXd& x) const override;
  ScheduleEvents apply_schedule(std::size_t, std::mt19937_64&) override { return {}; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<UnicycleEnv>(*this); }
  // Turn in place toward the origin until roughly aligned, then drive forward.
  std::optional<Eigen::VectorXd> turn_inward(const Eigen::VectorXd& x) const override;
  std::vector<std::size_t> angular_dims() const override { return {2}; }

 private:
  double k_v_, k_w_, dt_;
  InputBox box_;
  RewardSpec reward_;
};

Eigen::VectorXd unicycle_step(double k_v, double k_w, double dt, std::span<const double> x, std::span<const double> u);

// Builds an environment from config: {"kind": "quadrotor"|"unicycle", ...}.
std::unique_ptr<Environment> make_environment(const nlohmann::json& cfg);

}  // namespace certrl
