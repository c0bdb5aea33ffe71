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

#include "certrl/learners.hpp"

#include <cmath>

namespace certrl {

namespace {

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

AffineExtract affine_from_basis(const ParametricModel::Basis& basis, const Eigen::VectorXd& h, const Eigen::VectorXd& x,
                                std::size_t input_dim) {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(input_dim));
  const Eigen::VectorXd base = basis(view(x), view(u)) * h;
  AffineExtract a;
  a.f_hat = base - x;
  a.g_hat.resize(x.size(), static_cast<Eigen::Index>(input_dim));
  for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(input_dim); ++j) {
    u(j) = 1.0;
    a.g_hat.col(j) = basis(view(x), view(u)) * h - base;
    u(j) = 0.0;
  }
  return a;
}

AffineExtract ParametricLearner::affine(const Eigen::VectorXd& x) const {
  const ParametricModel& m = model_;
  return affine_from_basis([&m](std::span<const double> xs, std::span<const double> us) { return m.basis(xs, us); },
                           m.coefficients(), x, n_u_);
}

LearnerUpdate ParametricLearner::update(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& x_next) {
  const auto r = parametric_update(model_, view(x), view(u), view(x_next));
  return {r.skipped, r.residual_norm};
}

BayesLinearLearner::BayesLinearLearner(BayesLinearState state, ParametricModel::Basis basis, std::size_t input_dim)
    : state_(std::move(state)), basis_(std::move(basis)), n_u_(input_dim), mean_(state_.mean()) {}

AffineExtract BayesLinearLearner::affine(const Eigen::VectorXd& x) const {
  return affine_from_basis(basis_, mean_, x, n_u_);
}

LearnerUpdate BayesLinearLearner::update(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                         const Eigen::VectorXd& x_next) {
  const Eigen::MatrixXd xi = basis_(view(x), view(u));
  const double residual = (xi * mean_ - x_next).norm();
  state_ = bayes_linear_update(std::move(state_), xi, view(x_next));
  mean_ = state_.mean();
  return {false, residual};
}

StructuredLearner::StructuredLearner(StructuredModel model, Eigen::VectorXd input_scale, std::vector<std::size_t> angular)
    : model_(std::move(model)), scale_(std::move(input_scale)), angular_(std::move(angular)) {
  if (scale_.size() != 0 && static_cast<std::size_t>(scale_.size()) != model_.input_dim()) {
    throw std::invalid_argument("structured learner: input scale has the wrong length");
  }
  if (scale_.size() != 0 && !(scale_.array() > 0.0).all()) {
    throw std::invalid_argument("structured learner: input scale must be positive");
  }
  for (std::size_t d : angular_) {
    if (d >= model_.state_dim()) throw std::invalid_argument("structured learner: angular coordinate out of range");
  }
}

Eigen::VectorXd StructuredLearner::scaled(const Eigen::VectorXd& u) const {
  return scale_.size() == 0 ? u : Eigen::VectorXd(scale_.cwiseProduct(u));
}

AffineExtract StructuredLearner::affine(const Eigen::VectorXd& x) const {
  AffineExtract a = extract_affine(model_, view(x));
  // g_hat(x) (s o u) = (g_hat(x) diag(s)) u
  if (scale_.size() != 0) a.g_hat = a.g_hat * scale_.asDiagonal();
  return a;
}

LearnerUpdate StructuredLearner::update(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& x_next) {
  const Eigen::VectorXd us = scaled(u);
  Eigen::VectorXd target = x_next;
  for (std::size_t d : angular_) {
    const auto i = static_cast<Eigen::Index>(d);
    target(i) = x(i) + wrap_angle(x_next(i) - x(i));
  }
  const auto pred = predict_delta(model_, view(x), view(us));
  double err = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double e = pred[static_cast<std::size_t>(i)] - (target(i) - x(i));
    err += e * e;
  }
  model_ = update_structured(std::move(model_), view(x), view(us), view(target));
  return {false, std::sqrt(err)};
}

}  // namespace certrl
