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

// Discrete-time exponential control barrier certificates, the certified
// input set for a learned control-affine model, and the safe-control solver.

#include <Eigen/Dense>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace certrl {

struct BarrierSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::function<double(std::span<const double>)> value;
  std::function<Eigen::VectorXd(std::span<const double>)> gradient;
  double eta = 0.01;   // in (0, 1]
  double nu = 0.0;     // Lipschitz constant of the gradient
  double rho1 = 0.0;   // certificate margin
  double nu_b = 1.0;   // Lipschitz constant of the barrier itself

  double operator()(std::span<const double> x) const { return value(x); }
  // Throws std::invalid_argument on out-of-range parameters or missing evaluators.
  void validate() const;
};

// B(x_next) - B(x) + eta B(x); nonnegative iff the transition satisfies the certificate.
double dcbf_residual(const BarrierSpec& spec, std::span<const double> x, std::span<const double> x_next);

// min_i B_i(x); +infinity for an empty list.
double min_barrier(const std::vector<BarrierSpec>& barriers, std::span<const double> x);

// Preset barriers. All gradients are analytic.
// Box on coordinate `coord`: {lo <= x[coord] <= hi} as two barriers (upper, lower).
std::vector<BarrierSpec> interval_barriers(std::size_t state_dim, std::size_t coord, double lo, double hi, double eta);
// Vertical quadrotor: hi - x and x - lo on the position coordinate of [x; xdot].
std::vector<BarrierSpec> quadrotor_box(double limit = 3.0, double eta = 0.01);
// r^2 - |x|^2, gradient Lipschitz constant 2.
BarrierSpec quadratic_ball(std::size_t state_dim, double radius = 1.0, double eta = 0.01);

// Strictly increasing penalty shaping with its derivative.
struct PenaltyShape {
  std::function<double(double)> value = [](double a) { return a; };
  std::function<double(double)> derivative = [](double) { return 1.0; };
};

double wrap_angle(double a);

// On states [px; py; theta]: B(x) = base(px, py) - upsilon * shape(|wrap(theta - heading(px, py))|),
// where heading is the direction of the base gradient (turning toward the interior).
struct OrientationBarrier {
  std::string name;
  std::function<double(double, double)> base;
  std::function<Eigen::Vector2d(double, double)> base_gradient;
  double upsilon = 0.1;
  PenaltyShape shape;

  double target_heading(double px, double py) const;
  BarrierSpec to_spec(double eta, double rho1 = 0.0) const;
};

// The four oriented walls of [-x_max, x_max] x [-y_max, y_max] for a forward-only vehicle.
std::vector<BarrierSpec> unicycle_oriented_box(double x_max = 1.2, double y_max = 1.2, double upsilon = 0.1,
                                               double eta = 0.1);

// Builds a named preset from config parameters ("quadrotor_box", "unicycle_oriented_box", "quadratic_ball").
std::vector<BarrierSpec> barrier_preset(const std::string& name, const nlohmann::json& params);

struct InputBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  std::size_t dim() const { return static_cast<std::size_t>(lo.size()); }
  Eigen::VectorXd midpoint() const { return 0.5 * (lo + hi); }
  bool contains(const Eigen::VectorXd& u, double slack = 0.0) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& u) const;
  void validate() const;
};

// Certified input set at state x for the learned step x_next - x ~ f_hat + g_hat u.
struct SafeInputProblem {
  Eigen::VectorXd x;
  Eigen::VectorXd f_hat;
  Eigen::MatrixXd g_hat;
  std::vector<BarrierSpec> barriers;
  InputBox box;

  void validate() const;
};

// grad B(x)'(f + g u) + eta B(x) - (nu / 2) |f + g u|^2 - rho1; concave in u.
double certified_margin(const SafeInputProblem& problem, const BarrierSpec& spec, const Eigen::VectorXd& u);
// Minimum over all barriers of the problem; +infinity without barriers.
double min_certified_margin(const SafeInputProblem& problem, const Eigen::VectorXd& u);

// Margin of one barrier as c0 + lin'u - u' quad u.
struct QuadraticMargin {
  double c0 = 0.0;
  Eigen::VectorXd lin;
  Eigen::MatrixXd quad;  // positive semidefinite

  double operator()(const Eigen::VectorXd& u) const { return c0 + lin.dot(u) - u.dot(quad * u); }
};

std::vector<QuadraticMargin> margin_forms(const SafeInputProblem& problem);

struct SafeControlResult {
  bool feasible = false;
  Eigen::VectorXd u;          // optimizer, or the max-min-margin witness when infeasible
  double min_margin = 0.0;    // min certified margin at u
  double objective = 0.0;     // b'u
  int newton_steps = 0;
  bool used_fallback = false; // sample_safe_input only: solver path taken
  int draws = 0;              // sample_safe_input only: rejection draws used
};

// Maximizes b'u over box and all certified margins >= 0 by a log-barrier interior-point method.
// b == 0 returns the box midpoint when certified, otherwise the analytic center of the set.
SafeControlResult solve_safe_control(const SafeInputProblem& problem, const Eigen::VectorXd& b);

// Uniform rejection sampling over the box (at most max_draws), then the solver with a random objective.
SafeControlResult sample_safe_input(const SafeInputProblem& problem, std::mt19937_64& rng, int max_draws = 10000);

// -min(min_i B_i(x), 0) + c * dist(h, Omega).
double lyapunov_value(std::span<const double> x, std::span<const double> h,
                      const std::function<double(std::span<const double>)>& omega_distance, double c,
                      const std::vector<BarrierSpec>& barriers);

}  // namespace certrl
