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

#include "certrl/algorithm1.hpp"

#include <stdexcept>

namespace certrl {

void PolicyConfig::validate() const {
  if (update_period == 0) throw std::invalid_argument("policy: update period must be at least 1");
}

ControlLoop::ControlLoop(std::unique_ptr<Environment> env, std::unique_ptr<DynamicsLearner> learner,
                         std::vector<BarrierSpec> barriers, std::optional<QModel> qmodel, LoopConfig config,
                         std::uint64_t seed)
    : env_(std::move(env)),
      learner_(std::move(learner)),
      barriers_(std::move(barriers)),
      qmodel_(std::move(qmodel)),
      config_(config),
      rng_(seed) {
  if (!env_ || !learner_) throw std::invalid_argument("control loop: environment and learner required");
  config_.policy.validate();
  if (auto* exact = dynamic_cast<ExactLearner*>(learner_.get())) exact->rebind(env_.get());
  for (const auto& b : barriers_) {
    if (b.state_dim != env_->state_dim()) throw std::invalid_argument("control loop: barrier '" + b.name + "' dimension mismatch");
  }
  if (qmodel_) {
    if (qmodel_->spec().state_dim() != env_->state_dim() || qmodel_->spec().input_dim() != env_->input_dim()) {
      throw std::invalid_argument("control loop: value model dimensions do not match the environment");
    }
    policy_ = improve_policy(*qmodel_, config_.value_inputs);
  }
}

void ControlLoop::refresh_policy() {
  if (qmodel_) policy_ = improve_policy(*qmodel_, config_.value_inputs);
}

SafeInputProblem ControlLoop::problem_at(const Eigen::VectorXd& x) const {
  const AffineExtract a = learner_->affine(x);
  return SafeInputProblem{x, a.f_hat, a.g_hat, barriers_, env_->box()};
}

SafeControlResult ControlLoop::act(const Eigen::VectorXd& x) const {
  const SafeInputProblem p = problem_at(x);
  if (qmodel_) return policy_.act(p);
  return solve_safe_control(p, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(env_->input_dim())));
}

namespace {

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::vector<double> join(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::vector<double> z(a.data(), a.data() + a.size());
  z.insert(z.end(), b.data(), b.data() + b.size());
  return z;
}

}  // namespace

StepRecord ControlLoop::step() {
  StepRecord rec;
  rec.n = n_;
  const ScheduleEvents ev = env_->apply_schedule(n_, rng_);
  rec.switched = ev.switched;
  rec.relocated = ev.relocated;
  if (ev.relocated) recent_.clear();

  const Eigen::VectorXd x = env_->state();
  rec.x = x;
  const SafeInputProblem problem = problem_at(x);
  rec.explore = n_ < config_.policy.explore_steps;
  SafeControlResult choice = rec.explore ? sample_safe_input(problem, rng_) : act(x);
  rec.infeasible = !choice.feasible;
  Eigen::VectorXd u = problem.box.clamp(choice.u);

  if (config_.deadlock.enabled) {
    recent_.push_back(x);
    while (recent_.size() > config_.deadlock.window + 1) recent_.pop_front();
    const bool stalled = recent_.size() == config_.deadlock.window + 1 &&
                         (recent_.back().head(2) - recent_.front().head(2)).norm() < config_.deadlock.threshold;
    // No certified input exists: treat like a stall and steer inward.
    if (stalled || rec.infeasible) {
      if (auto turn = env_->turn_inward(x)) {
        u = problem.box.clamp(*turn);
        rec.deadlock = true;
      }
    }
  }
  rec.u = u;
  for (const auto& b : barriers_) {
    rec.barrier_values.push_back(b.value(view(x)));
    rec.margins.push_back(certified_margin(problem, b, u));
  }

  const Eigen::VectorXd x_next = env_->step(u);
  rec.x_next = x_next;
  rec.reward = env_->reward().eval(view(x), view(u));

  const auto truth = env_->true_parameters();
  if (const auto before = learner_->parameters(); before && truth && before->size() == truth->size()) {
    rec.param_error_before = (*before - *truth).norm();
  }
  if (config_.learn_model) {
    const LearnerUpdate lu = learner_->update(x, u, x_next);
    rec.model_skipped = lu.skipped;
    rec.model_residual = lu.residual;
  }
  const auto params = learner_->parameters();
  double dist = 0.0;
  if (params && truth && params->size() == truth->size()) {
    dist = (*params - *truth).norm();
    rec.param_error = dist;
  }
  rec.lyapunov = barriers_.empty() ? 0.0 : -std::min(min_barrier(barriers_, view(x_next)), 0.0);
  rec.lyapunov += config_.lyapunov_c * dist;

  if (qmodel_) {
    // phi(x_next) under the current policy and the updated model.
    const SafeControlResult next = act(x_next);
    const Eigen::VectorXd u_next = env_->box().clamp(next.u);
    const auto z = join(x, config_.value_inputs.apply(u));
    const auto z_next = join(x_next, config_.value_inputs.apply(u_next));
    rec.psi_prediction = psi_predict(*qmodel_, z, z_next);
    if (config_.learn_value) *qmodel_ = q_update(std::move(*qmodel_), z, z_next, rec.reward);
    if (n_ > 0 && n_ % config_.policy.update_period == 0) {
      policy_ = improve_policy(*qmodel_, config_.value_inputs);
      rec.policy_update = true;
    }
  }
  ++n_;
  return rec;
}

StepRecord algorithm1_step(ControlLoop& loop) { return loop.step(); }

}  // namespace certrl
