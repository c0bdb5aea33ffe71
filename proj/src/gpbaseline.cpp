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

#include "certrl/gpbaseline.hpp"

#include <algorithm>
#include <stdexcept>

namespace certrl {

void GpSarsaState::observe(std::vector<double> z_next, double reward, double noise_variance) {
  if (z.empty()) throw std::logic_error("gp sarsa: initial input must be set before observing transitions");
  z.push_back(std::move(z_next));
  rewards.push_back(reward);
  noise.push_back(noise_variance);
}

void GpSarsaState::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gp sarsa: gamma must lie in [0, 1)");
  if (rewards.empty()) throw std::invalid_argument("gp sarsa: at least one transition required");
  if (z.size() != rewards.size() + 1) throw std::invalid_argument("gp sarsa: need one more input than rewards");
  if (noise.size() != rewards.size()) throw std::invalid_argument("gp sarsa: need one noise variance per reward");
  for (double s : noise) {
    if (!(s > 0.0)) throw std::invalid_argument("gp sarsa: noise variances must be positive");
  }
  for (const auto& p : z) kernel.check_input(p.size());
}

Eigen::MatrixXd difference_matrix(std::size_t n, double gamma) {
  const auto rows = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(rows, rows + 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    h(i, i) = 1.0;
    h(i, i + 1) = -gamma;
  }
  return h;
}

Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  const auto n = a.rows();
  for (double jitter = 1e-10; jitter <= 1e-6 * (1 + 1e-9); jitter *= 10.0) {
    llt.compute(a + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw std::runtime_error("cholesky: matrix not positive definite even with jitter 1e-6");
}

namespace {

Eigen::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::VectorXd kernel_column(const KernelSpec& k, const std::vector<std::vector<double>>& pts,
                              std::span<const double> q) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out(static_cast<Eigen::Index>(i)) = eval_kernel(k, q, pts[i]);
  return out;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Subset-of-regressors posterior over Q restricted to the first `count` inputs.
Posterior sor_posterior(const GpSarsaState& s, std::span<const double> query, std::size_t count) {
  if (count == 0) return {0.0, 0.0};
  const std::vector<std::vector<double>> basis(s.z.begin(), s.z.begin() + static_cast<std::ptrdiff_t>(count));
  const Eigen::MatrixXd kdd = gram_matrix(s.kernel, basis);
  Eigen::MatrixXd kzd(static_cast<Eigen::Index>(s.z.size()), static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < s.z.size(); ++i) kzd.row(static_cast<Eigen::Index>(i)) = kernel_column(s.kernel, basis, s.z[i]);
  const Eigen::MatrixXd phi = difference_matrix(s.transitions(), s.gamma) * kzd;
  const Eigen::VectorXd inv_noise = to_vec(s.noise).cwiseInverse();
  const Eigen::MatrixXd a = phi.transpose() * inv_noise.asDiagonal() * phi + kdd;
  const auto llt = robust_cholesky(a);
  const Eigen::VectorXd rhs = phi.transpose() * inv_noise.asDiagonal() * to_vec(s.rewards);
  const Eigen::VectorXd kq = kernel_column(s.kernel, basis, query);
  return {kq.dot(llt.solve(rhs)), std::max(kq.dot(llt.solve(kq)), 0.0)};
}

}  // namespace

Posterior gp_sarsa_posterior(const GpSarsaState& state, std::span<const double> query) {
  state.validate();
  if (state.freeze_at && *state.freeze_at < state.z.size()) return sor_posterior(state, query, *state.freeze_at);
  const Eigen::MatrixXd h = difference_matrix(state.transitions(), state.gamma);
  const Eigen::MatrixXd k = gram_matrix(state.kernel, state.z);
  const Eigen::MatrixXd a = h * k * h.transpose() + Eigen::MatrixXd(to_vec(state.noise).asDiagonal());
  const auto llt = robust_cholesky(a);
  const Eigen::VectorXd hk = h * kernel_column(state.kernel, state.z, query);
  const double prior = eval_kernel(state.kernel, query, query);
  return {hk.dot(llt.solve(to_vec(state.rewards))), prior - hk.dot(llt.solve(hk))};
}

Posterior psi_route_posterior(const GpSarsaState& state, std::span<const double> query) {
  state.validate();
  if (state.freeze_at && *state.freeze_at < state.z.size()) return sor_posterior(state, query, *state.freeze_at);
  const std::size_t n = state.transitions();
  const std::size_t nz = state.z.front().size();
  const KernelSpec paired = KernelSpec::paired(state.gamma, state.kernel, nz);
  std::vector<std::vector<double>> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pairs.push_back(concat(state.z[i], state.z[i + 1]));
  const Eigen::MatrixXd a = gram_matrix(paired, pairs) + Eigen::MatrixXd(to_vec(state.noise).asDiagonal());
  const auto llt = robust_cholesky(a);
  // Atoms of the value space: kq_i = k(z*, z_i) - gamma k(z*, z_{i+1}).
  Eigen::VectorXd kq(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    kq(static_cast<Eigen::Index>(i)) =
        eval_kernel(state.kernel, query, state.z[i]) - state.gamma * eval_kernel(state.kernel, query, state.z[i + 1]);
  }
  const double prior = eval_kernel(state.kernel, query, query);
  return {kq.dot(llt.solve(to_vec(state.rewards))), prior - kq.dot(llt.solve(kq))};
}

GpSarsaState gp_sarsa2_mode(GpSarsaState state, std::size_t freeze_at) {
  state.freeze_at = freeze_at;
  return state;
}

BayesLinearState::BayesLinearState(std::size_t dim, double prior_variance, double noise_variance)
    : BayesLinearState(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
                       prior_variance * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim),
                                                                  static_cast<Eigen::Index>(dim)),
                       noise_variance) {}

BayesLinearState::BayesLinearState(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov, double noise_variance)
    : noise_(noise_variance) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("bayes linear: noise variance must be positive");
  if (prior_cov.rows() != prior_mean.size() || prior_cov.cols() != prior_mean.size()) {
    throw std::invalid_argument("bayes linear: prior covariance shape mismatch");
  }
  precision_ = robust_cholesky(prior_cov).solve(Eigen::MatrixXd::Identity(prior_cov.rows(), prior_cov.cols()));
  info_ = precision_ * prior_mean;
}

Eigen::VectorXd BayesLinearState::mean() const { return robust_cholesky(precision_).solve(info_); }

Eigen::MatrixXd BayesLinearState::covariance() const {
  return robust_cholesky(precision_).solve(Eigen::MatrixXd::Identity(precision_.rows(), precision_.cols()));
}

BayesLinearState bayes_linear_update(BayesLinearState state, const Eigen::MatrixXd& basis,
                                     std::span<const double> x_next) {
  if (basis.cols() != state.precision_.rows() || basis.rows() != static_cast<Eigen::Index>(x_next.size())) {
    throw std::invalid_argument("bayes linear: basis shape mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> y(x_next.data(), static_cast<Eigen::Index>(x_next.size()));
  state.precision_ += basis.transpose() * basis / state.noise_;
  state.info_ += basis.transpose() * y / state.noise_;
  ++state.count_;
  return state;
}

GpSarsaOnline::GpSarsaOnline(KernelSpec kernel, double gamma, double noise_variance, std::size_t window,
                             std::optional<std::size_t> freeze_at, std::size_t refit_every)
    : kernel_(std::move(kernel)),
      gamma_(gamma),
      noise_(noise_variance),
      window_(window),
      freeze_at_(freeze_at),
      refit_every_(std::max<std::size_t>(refit_every, 1)) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gp sarsa: gamma must lie in [0, 1)");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("gp sarsa: noise variance must be positive");
  if (window == 0) throw std::invalid_argument("gp sarsa: window must be positive");
}

Eigen::VectorXd GpSarsaOnline::features(std::span<const double> pair) const {
  const KernelSpec paired = KernelSpec::paired(gamma_, kernel_, pair.size() / 2);
  return kernel_column(paired, basis_, pair);
}

void GpSarsaOnline::observe(std::span<const double> z, std::span<const double> z_next, double reward) {
  ++seen_;
  if (frozen_) {
    const Eigen::VectorXd f = features(concat(z, z_next));
    phi_t_phi_ += f * f.transpose();
    phi_t_r_ += f * reward;
  } else {
    from_.emplace_back(z.begin(), z.end());
    to_.emplace_back(z_next.begin(), z_next.end());
    rewards_.push_back(reward);
    const std::size_t cap = freeze_at_ ? std::max<std::size_t>(*freeze_at_, 1) : window_;
    if (!freeze_at_ && from_.size() > cap) {
      from_.erase(from_.begin());
      to_.erase(to_.begin());
      rewards_.erase(rewards_.begin());
    }
    if (freeze_at_ && seen_ >= *freeze_at_) {
      frozen_ = true;
      basis_.clear();
      for (std::size_t i = 0; i < from_.size() && i < *freeze_at_; ++i) basis_.push_back(concat(from_[i], to_[i]));
      const KernelSpec paired = KernelSpec::paired(gamma_, kernel_, z.size());
      gram_ = gram_matrix(paired, basis_);
      const auto r = static_cast<Eigen::Index>(basis_.size());
      phi_t_phi_ = Eigen::MatrixXd::Zero(r, r);
      phi_t_r_ = Eigen::VectorXd::Zero(r);
      for (std::size_t i = 0; i < from_.size(); ++i) {
        const Eigen::VectorXd f = gram_.col(static_cast<Eigen::Index>(i));
        phi_t_phi_ += f * f.transpose();
        phi_t_r_ += f * rewards_[i];
      }
      from_.clear();
      to_.clear();
      rewards_.clear();
      refit();
      return;
    }
  }
  if (seen_ % refit_every_ == 0) refit();
}

void GpSarsaOnline::refit() {
  if (frozen_) {
    if (basis_.empty()) return;
    const auto llt = robust_cholesky(phi_t_phi_ + noise_ * gram_);
    weights_ = llt.solve(phi_t_r_);
    return;
  }
  basis_.clear();
  for (std::size_t i = 0; i < from_.size(); ++i) basis_.push_back(concat(from_[i], to_[i]));
  if (basis_.empty()) return;
  const KernelSpec paired = KernelSpec::paired(gamma_, kernel_, from_.front().size());
  const auto n = static_cast<Eigen::Index>(basis_.size());
  const Eigen::MatrixXd a = gram_matrix(paired, basis_) + noise_ * Eigen::MatrixXd::Identity(n, n);
  weights_ = robust_cholesky(a).solve(to_vec(rewards_));
}

double GpSarsaOnline::predict_difference(std::span<const double> z, std::span<const double> z_next) const {
  if (basis_.empty() || weights_.size() != static_cast<Eigen::Index>(basis_.size())) return 0.0;
  return features(concat(z, z_next)).dot(weights_);
}

double GpSarsaOnline::predict(std::span<const double> z) const {
  if (basis_.empty() || weights_.size() != static_cast<Eigen::Index>(basis_.size())) return 0.0;
  const std::size_t nz = z.size();
  double q = 0.0;
  for (std::size_t j = 0; j < basis_.size(); ++j) {
    const std::span<const double> p(basis_[j]);
    q += weights_(static_cast<Eigen::Index>(j)) *
         (eval_kernel(kernel_, z, p.first(nz)) - gamma_ * eval_kernel(kernel_, z, p.subspan(nz)));
  }
  return q;
}

}  // namespace certrl
