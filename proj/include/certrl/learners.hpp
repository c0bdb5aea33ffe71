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

// Dynamics learners behind one interface so the control loop can swap the
// kernel model, the parametric projection learner, the Bayesian baseline and
// the exact oracle.

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>

#include "certrl/envs.hpp"
#include "certrl/gpbaseline.hpp"
#include "certrl/structmodel.hpp"

namespace certrl {

struct LearnerUpdate {
  bool skipped = false;
  double residual = 0.0;  // prediction error norm before the update
};

class DynamicsLearner {
 public:
  virtual ~DynamicsLearner() = default;
  virtual std::string name() const = 0;
  // x_next - x ~ f_hat + g_hat u at x.
  virtual AffineExtract affine(const Eigen::VectorXd& x) const = 0;
  virtual LearnerUpdate update(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& x_next) = 0;
  // Parameter vector when the learner has a finite one.
  virtual std::optional<Eigen::VectorXd> parameters() const { return std::nullopt; }
  virtual std::unique_ptr<DynamicsLearner> clone() const = 0;
};

class ParametricLearner final : public DynamicsLearner {
 public:
  ParametricLearner(ParametricModel model, std::size_t input_dim) : model_(std::move(model)), n_u_(input_dim) {}
  std::string name() const override { return "parametric"; }
  AffineExtract affine(const Eigen::VectorXd& x) const override;
  LearnerUpdate update(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& x_next) override;
  std::optional<Eigen::VectorXd> parameters() const override { return model_.coefficients(); }
  std::unique_ptr<DynamicsLearner> clone() const override { return std::make_unique<ParametricLearner>(*this); }
  const ParametricModel& model() const { return model_; }

 private:
  ParametricModel model_;
  std::size_t n_u_;
};

class BayesLinearLearner final : public DynamicsLearner {
 public:
  BayesLinearLearner(BayesLinearState state, ParametricModel::Basis basis, std::size_t input_dim);
  std::string name() const override { return "bayes_linear"; }
  AffineExtract affine(const Eigen::VectorXd& x) const override;
  LearnerUpdate update(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& x_next) override;
  std::optional<Eigen::VectorXd> parameters() const override { return mean_; }
  std::unique_ptr<DynamicsLearner> clone() const override { return std::make_unique<BayesLinearLearner>(*this); }

 private:
  BayesLinearState state_;
  ParametricModel::Basis basis_;
  std::size_t n_u_;
  Eigen::VectorXd mean_;
};

// The model sees inputs multiplied by `input_scale` (empty: unscaled); g_hat is mapped back to raw
// inputs. Deltas along `angular` state coordinates are wrapped to [-pi, pi] before learning.
class StructuredLearner final : public DynamicsLearner {
 public:
  explicit StructuredLearner(StructuredModel model, Eigen::VectorXd input_scale = {},
                             std::vector<std::size_t> angular = {});
  std::string name() const override { return "structured"; }
  AffineExtract affine(const Eigen::VectorXd& x) const override;
  LearnerUpdate update(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& x_next) override;
  std::unique_ptr<DynamicsLearner> clone() const override { return std::make_unique<StructuredLearner>(*this); }
  const StructuredModel& model() const { return model_; }
  const Eigen::VectorXd& input_scale() const { return scale_; }

 private:
  Eigen::VectorXd scaled(const Eigen::VectorXd& u) const;

  StructuredModel model_;
  Eigen::VectorXd scale_;
  std::vector<std::size_t> angular_;
};

// Reads the true affine decomposition from a live environment; never learns.
class ExactLearner final : public DynamicsLearner {
 public:
  explicit ExactLearner(const Environment* env) : env_(env) {}
  std::string name() const override { return "exact"; }
  AffineExtract affine(const Eigen::VectorXd& x) const override { return env_->exact_affine(x); }
  LearnerUpdate update(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) override { return {}; }
  std::unique_ptr<DynamicsLearner> clone() const override { return std::make_unique<ExactLearner>(*this); }
  void rebind(const Environment* env) { env_ = env; }

 private:
  const Environment* env_;
};

// Affine split of x_next = Xi(x, u) h around u = 0, returned as a step (x_next - x).
AffineExtract affine_from_basis(const ParametricModel::Basis& basis, const Eigen::VectorXd& h, const Eigen::VectorXd& x,
                                std::size_t input_dim);

}  // namespace certrl
