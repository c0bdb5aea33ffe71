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

// Barrier-certified adaptive reinforcement learning loop: certified
// exploration or greedy control, model learning, paired-space value learning
// and periodic policy replacement.

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "certrl/barrier.hpp"
#include "certrl/envs.hpp"
#include "certrl/learners.hpp"
#include "certrl/valuerl.hpp"

namespace certrl {

struct PolicyConfig {
  std::size_t update_period = 1000;   // N_f
  std::size_t explore_steps = 10000;  // uniform certified exploration before acting greedily

  void validate() const;
};

struct DeadlockConfig {
  bool enabled = false;
  std::size_t window = 10;
  double threshold = 1e-3;  // displacement over the window
};

struct LoopConfig {
  PolicyConfig policy;
  DeadlockConfig deadlock;
  double lyapunov_c = 1.0;
  bool learn_model = true;
  bool learn_value = true;
  InputMap value_inputs;  // coordinate change applied to inputs before the value model
};

struct StepRecord {
  std::size_t n = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  Eigen::VectorXd x_next;
  double reward = 0.0;
  std::vector<double> barrier_values;  // B_i(x)
  std::vector<double> margins;         // certified margins of u under the learned model
  std::optional<double> psi_prediction;  // value-space prediction of the transition before its update
  std::optional<double> param_error_before;  // |h - h*| before the model update, current truth
  std::optional<double> param_error;         // |h - h*| after the model update
  double model_residual = 0.0;
  double lyapunov = 0.0;
  bool switched = false;
  bool relocated = false;
  bool deadlock = false;
  bool policy_update = false;
  bool infeasible = false;
  bool explore = false;
  bool model_skipped = false;
};

class ControlLoop {
 public:
  ControlLoop(std::unique_ptr<Environment> env, std::unique_ptr<DynamicsLearner> learner,
              std::vector<BarrierSpec> barriers, std::optional<QModel> qmodel, LoopConfig config, std::uint64_t seed);
  ControlLoop(const ControlLoop&) = delete;
  ControlLoop& operator=(const ControlLoop&) = delete;

  // One loop body; increments the step counter.
  StepRecord step();

  std::size_t steps() const { return n_; }
  const Environment& env() const { return *env_; }
  Environment& env() { return *env_; }
  const DynamicsLearner& learner() const { return *learner_; }
  const std::optional<QModel>& qmodel() const { return qmodel_; }
  const Policy& policy() const { return policy_; }
  const std::vector<BarrierSpec>& barriers() const { return barriers_; }
  LoopConfig& config() { return config_; }
  // Rebuilds the greedy policy from the current value model.
  void refresh_policy();

  // Certified input problem at x under the current learned model.
  SafeInputProblem problem_at(const Eigen::VectorXd& x) const;
  // Greedy certified input of the current policy; falls back to the max-min-margin witness.
  SafeControlResult act(const Eigen::VectorXd& x) const;

 private:
  std::unique_ptr<Environment> env_;
  std::unique_ptr<DynamicsLearner> learner_;
  std::vector<BarrierSpec> barriers_;
  std::optional<QModel> qmodel_;
  Policy policy_;
  LoopConfig config_;
  std::mt19937_64 rng_;
  std::size_t n_ = 0;
  std::deque<Eigen::VectorXd> recent_;
};

StepRecord algorithm1_step(ControlLoop& loop);

}  // namespace certrl
