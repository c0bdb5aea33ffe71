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

// Reference computations written independently of the library code paths:
// brute-force grids, dense textbook formulas and plain rollouts. Used to
// check the optimized implementations.

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "certrl/barrier.hpp"
#include "certrl/gpbaseline.hpp"
#include "certrl/valuerl.hpp"

namespace certrl::oracle {

// argmin_x 0.5 (x - v)^2 + t |x| over a uniform grid of the given step on [-|v| - 1, |v| + 1].
double soft_threshold_grid(double v, double t, double step = 1e-5);

// Mean and variance of GP SARSA with H, K and Sigma formed explicitly and solved by full-pivot LU.
Posterior gp_sarsa_dense(const GpSarsaState& state, const std::vector<double>& query);

// Certified margin written directly from the barrier definition:
// grad' d + eta B - nu/2 |d|^2 - rho1 with d = f + g u.
double margin(const SafeInputProblem& problem, const BarrierSpec& barrier, const Eigen::VectorXd& u);

struct GridOptimum {
  bool feasible = false;
  double objective = 0.0;
  Eigen::Vector2d u = Eigen::Vector2d::Zero();
};

// max b'u over a 2-D grid of the box with every margin >= 0.
GridOptimum safe_control_grid(const SafeInputProblem& problem, const Eigen::Vector2d& b, double resolution = 1e-3);

// RKHS norm of the difference of two value-model expansions, computed from explicit Gram
// matrices: in the paired space with coefficients [h_A; -h_B], and in the value space with
// centers z~ and w~ carrying h and -gamma h.
RkhsNorms rkhs_norms_dense(const QModel& a, const QModel& b);

// sum_{t < horizon} gamma^t R(s_t) along a deterministic successor map over indices.
double rollout_value(const std::vector<double>& rewards, const std::function<std::size_t(std::size_t)>& next,
                     std::size_t start, double gamma, std::size_t horizon);

}  // namespace certrl::oracle
