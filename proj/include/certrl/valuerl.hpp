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

// Action-value learning through the paired-input space: the Bellman relation
// psi([z; w]) = Q(z) - gamma Q(w) turns value learning into regression of
// rewards, and Q is recovered from the same coefficients.

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "certrl/adafilter.hpp"
#include "certrl/barrier.hpp"
#include "certrl/kernels.hpp"

namespace certrl {

class QKernelSpec {
 public:
  // One value kernel per scale: gaussian_sigma(x) (x) (1 + u'v / 4).
  static QKernelSpec ladder(std::size_t n_x, std::size_t n_u, std::span<const double> sigmas, double gamma);
  // Custom value kernels over z = [x; u]; each must be affine in u for policy improvement.
  QKernelSpec(std::size_t n_x, std::size_t n_u, std::vector<KernelSpec> value_kernels, double gamma);

  std::size_t state_dim() const { return n_x_; }
  std::size_t input_dim() const { return n_u_; }
  std::size_t pair_dim() const { return n_x_ + n_u_; }
  double gamma() const { return gamma_; }
  std::size_t num_kernels() const { return value_.size(); }
  const KernelSpec& value_kernel(std::size_t m) const { return value_.at(m); }
  // Paired kernel over [z; w] built from value kernel m.
  const KernelSpec& paired_kernel(std::size_t m) const { return paired_.at(m); }

  bool same_as(const QKernelSpec& other) const;
  nlohmann::json to_json() const;
  static QKernelSpec from_json(const nlohmann::json& j);

 private:
  std::size_t n_x_, n_u_;
  std::vector<KernelSpec> value_;
  std::vector<KernelSpec> paired_;
  double gamma_;
};

// (k(z, zt) - g k(z, wt)) - g (k(w, zt) - g k(w, wt)) for value kernel m.
double paired_kernel_eval(const QKernelSpec& spec, std::size_t m, std::span<const double> zw,
                          std::span<const double> zw_tilde);

class QModel {
 public:
  QModel(QKernelSpec spec, ApfbsConfig config, std::size_t r_max);

  const QKernelSpec& spec() const { return spec_; }
  const ApfbsConfig& config() const { return config_; }
  const FilterState& filter() const { return filter_; }
  FilterState& filter() { return filter_; }
  const TransitionWindow& window() const { return window_; }

  friend QModel q_update(QModel model, std::span<const double> z, std::span<const double> z_next, double reward);

  nlohmann::json to_json() const;
  static QModel from_json(const nlohmann::json& j);

 private:
  QKernelSpec spec_;
  ApfbsConfig config_;
  FilterState filter_;
  TransitionWindow window_;
};

// Q(z) = sum_j h_j (k(z, zt_j) - gamma k(z, wt_j)) summed over kernels.
double q_predict(const QKernelSpec& spec, const FilterState& filter, std::span<const double> z);
double q_predict(const QModel& model, std::span<const double> z);
// psi([z; w]) = h' k([z; w]).
double psi_predict(const QModel& model, std::span<const double> z, std::span<const double> w);

// One admit + update on the pair [z; z_next] with target reward.
QModel q_update(QModel model, std::span<const double> z, std::span<const double> z_next, double reward);

// Q(x, u) = a + b'u for affine-in-input value kernels.
struct AffineObjective {
  double a = 0.0;
  Eigen::VectorXd b;
};

// Greedy policy over the certified input set, frozen at the model snapshot it was built from.
// Affine change of input coordinates u -> scale o (u - center) applied before the value model.
struct InputMap {
  Eigen::VectorXd scale, center;  // both empty: identity

  bool identity() const { return scale.size() == 0; }
  Eigen::VectorXd apply(const Eigen::VectorXd& u) const {
    return identity() ? u : Eigen::VectorXd(scale.cwiseProduct(u - center));
  }
  // Box [lo, hi] onto [-1, 1] per coordinate.
  static InputMap centered(const InputBox& box);
};

class Policy {
 public:
  Policy() = default;
  // `inputs` is the coordinate change the value model was trained under; objectives and values
  // are expressed in raw input units.
  Policy(QKernelSpec spec, FilterState snapshot, InputMap inputs = {});

  bool empty() const { return !snapshot_ || snapshot_->size() == 0; }
  std::size_t atoms() const { return snapshot_ ? snapshot_->size() : 0; }
  AffineObjective objective(std::span<const double> x) const;
  double value(std::span<const double> x, std::span<const double> u) const;
  // Maximizer of Q(x, .) over the problem's certified set; infeasible results are returned as-is.
  SafeControlResult act(const SafeInputProblem& problem) const;

 private:
  std::shared_ptr<const QKernelSpec> spec_;
  std::shared_ptr<const FilterState> snapshot_;
  InputMap inputs_;
};

Policy improve_policy(const QModel& model, const InputMap& inputs = {});

struct RkhsNorms {
  double psi = 0.0;  // |psi_A - psi_B| in the paired space
  double q = 0.0;    // |Q_A - Q_B| in the value space
};

RkhsNorms rkhs_norms(const QModel& a, const QModel& b);

}  // namespace certrl
