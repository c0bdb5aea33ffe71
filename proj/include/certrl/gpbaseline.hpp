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

// Gaussian-process baselines: GP SARSA through the banded difference matrix,
// the same posterior computed in the paired-input space, a frozen-dictionary
// variant, and Bayesian linear regression for parametric model learning.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "certrl/kernels.hpp"

namespace certrl {

struct GpSarsaState {
  KernelSpec kernel;                    // value kernel over z = [x; u]
  double gamma = 0.9;
  std::vector<std::vector<double>> z;   // z_0 .. z_N
  std::vector<double> rewards;          // R_0 .. R_{N-1}
  std::vector<double> noise;            // per-observation variance, length N
  std::optional<std::size_t> freeze_at; // basis restricted to the first freeze_at inputs

  std::size_t transitions() const { return rewards.size(); }
  // Appends z_next and reward for the transition ending at z_next.
  void observe(std::vector<double> z_next, double reward, double noise_variance);
  void validate() const;
};

struct Posterior {
  double mean = 0.0;
  double variance = 0.0;
};

// N x (N + 1) matrix with rows (..., 1, -gamma, ...).
Eigen::MatrixXd difference_matrix(std::size_t n, double gamma);

// Mean k' H' (H K H' + Sigma)^{-1} R and variance k(z*, z*) - k' H' (H K H' + Sigma)^{-1} H k.
Posterior gp_sarsa_posterior(const GpSarsaState& state, std::span<const double> query);

// Regression of rewards on paired inputs [z_i; z_{i+1}] with the paired kernel, mapped back to Q.
Posterior psi_route_posterior(const GpSarsaState& state, std::span<const double> query);

// Marks the basis frozen at the first freeze_at inputs; posteriors then use subset-of-regressors
// over that basis. freeze_at >= N + 1 leaves the exact posterior unchanged.
GpSarsaState gp_sarsa2_mode(GpSarsaState state, std::size_t freeze_at);

// Cholesky factor of a + jitter I, escalating jitter from 1e-10 by x10 up to 1e-6 on failure.
Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a);

// Conjugate Gaussian posterior over linear parameters, kept in information form.
class BayesLinearState {
 public:
  BayesLinearState(std::size_t dim, double prior_variance = 25.0, double noise_variance = 0.01);
  BayesLinearState(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov, double noise_variance);

  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
  double noise_variance() const { return noise_; }
  std::size_t observations() const { return count_; }

  friend BayesLinearState bayes_linear_update(BayesLinearState state, const Eigen::MatrixXd& basis,
                                              std::span<const double> x_next);

 private:
  Eigen::MatrixXd precision_;
  Eigen::VectorXd info_;
  double noise_;
  std::size_t count_ = 0;
};

// x_next ~ N(basis h, noise I).
BayesLinearState bayes_linear_update(BayesLinearState state, const Eigen::MatrixXd& basis,
                                     std::span<const double> x_next);

// Streaming GP SARSA used by the experiment harness. Exact over the most recent `window`
// transitions when not frozen; with freeze_at set, the basis stops growing at that many inputs
// and later transitions only update the subset-of-regressors statistics.
class GpSarsaOnline {
 public:
  GpSarsaOnline(KernelSpec kernel, double gamma, double noise_variance, std::size_t window,
                std::optional<std::size_t> freeze_at, std::size_t refit_every = 100);

  void observe(std::span<const double> z, std::span<const double> z_next, double reward);
  // Prediction of the Bellman difference Q(z) - gamma Q(z_next) with the last refit.
  double predict_difference(std::span<const double> z, std::span<const double> z_next) const;
  double predict(std::span<const double> z) const;
  std::size_t basis_size() const { return basis_.size(); }

 private:
  void refit();
  Eigen::VectorXd features(std::span<const double> z) const;

  KernelSpec kernel_;
  double gamma_, noise_;
  std::size_t window_;
  std::optional<std::size_t> freeze_at_;
  std::size_t refit_every_;
  std::size_t seen_ = 0;

  // Pairs retained for exact fitting, and the fitted expansion.
  std::vector<std::vector<double>> from_, to_;
  std::vector<double> rewards_;
  std::vector<std::vector<double>> basis_;
  Eigen::VectorXd weights_;

  // Subset-of-regressors statistics once frozen.
  bool frozen_ = false;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd phi_t_phi_;
  Eigen::VectorXd phi_t_r_;
};

}  // namespace certrl
