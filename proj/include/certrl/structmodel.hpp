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

// Structured model learning: delta(x, u) = p(x, u) + f(x) + g(x) u learned per
// output dimension in a direct-sum RKHS, affine extraction, and the
// parametric projection learner used for the quadrotor.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <span>
#include <vector>

#include "certrl/adafilter.hpp"
#include "certrl/kernels.hpp"

namespace certrl {

enum class ModelBlock : int { p = 0, f = 1, g = 2 };

const char* block_name(ModelBlock b);

// One kernel of one block, evaluated on z = [x; u].
// The f-block kernel must ignore u; the g-block kernel must be linear in u.
struct BlockKernel {
  ModelBlock block;
  KernelSpec kernel;
};

// Default per-dimension kernel set over z = [x; u]:
// p: tau * gaussian_sigma([x;u]); f: tau * gaussian_sigma(x) (x) 1; g: gaussian_sigma(x) (x) linear(u).
std::vector<BlockKernel> default_block_kernels(std::size_t n_x, std::size_t n_u,
                                               std::span<const double> sigmas, double tau = 0.1);

class StructuredModel {
 public:
  StructuredModel() = default;
  // One kernel list and config per output dimension.
  StructuredModel(std::size_t n_x, std::size_t n_u, std::vector<std::vector<BlockKernel>> kernels,
                  std::vector<ApfbsConfig> configs, std::vector<std::size_t> r_max);
  // Same kernels and config for every output dimension.
  static StructuredModel uniform(std::size_t n_x, std::size_t n_u, std::vector<BlockKernel> kernels,
                                 const ApfbsConfig& config, std::size_t r_max);

  std::size_t state_dim() const { return n_x_; }
  std::size_t input_dim() const { return n_u_; }

  const FilterState& filter(std::size_t i) const { return filters_.at(i); }
  FilterState& filter(std::size_t i) { return filters_.at(i); }
  const ApfbsConfig& config(std::size_t i) const { return configs_.at(i); }
  ModelBlock block_of(std::size_t i, std::size_t m) const;

  // Prediction of one block at z for output dimension i.
  double block_predict(std::size_t i, ModelBlock b, std::span<const double> z) const;

  friend StructuredModel update_structured(StructuredModel model, std::span<const double> x,
                                           std::span<const double> u, std::span<const double> x_next);

  // [x; u] after checking both lengths.
  std::vector<double> join(std::span<const double> x, std::span<const double> u) const;

  nlohmann::json to_json() const;
  static StructuredModel from_json(const nlohmann::json& j);

 private:
  std::size_t n_x_ = 0;
  std::size_t n_u_ = 0;
  std::vector<FilterState> filters_;
  std::vector<TransitionWindow> windows_;
  std::vector<ApfbsConfig> configs_;
};

std::vector<double> predict_delta(const StructuredModel& model, std::span<const double> x,
                                  std::span<const double> u);

// Admit then update each output dimension with target (x_next - x)_i.
StructuredModel update_structured(StructuredModel model, std::span<const double> x, std::span<const double> u,
                                  std::span<const double> x_next);

struct AffineExtract {
  Eigen::VectorXd f_hat;  // n_x
  Eigen::MatrixXd g_hat;  // n_x x n_u
};

AffineExtract extract_affine(const StructuredModel& model, std::span<const double> x);

struct SparsityReport {
  // mass[i][b] = sum |h_j| over block b atoms of output dimension i
  std::vector<std::array<double, 3>> mass;
  std::vector<std::array<std::size_t, 3>> atoms;

  double total_mass(ModelBlock b) const;
  // p-block mass over g-block mass; infinity when the g-block is empty and p is not.
  double p_over_g() const;
  nlohmann::json to_json() const;
};

SparsityReport sparsity_report(const StructuredModel& model);

// Linear-in-parameter model x_next = Xi(x, u) h with projection updates.
class ParametricModel {
 public:
  using Basis = std::function<Eigen::MatrixXd(std::span<const double> x, std::span<const double> u)>;

  ParametricModel(Basis basis, Eigen::VectorXd h0, double step);

  const Eigen::VectorXd& coefficients() const { return h_; }
  void set_coefficients(Eigen::VectorXd h) { h_ = std::move(h); }
  double step() const { return step_; }
  Eigen::MatrixXd basis(std::span<const double> x, std::span<const double> u) const { return basis_(x, u); }
  Eigen::VectorXd predict(std::span<const double> x, std::span<const double> u) const;

 private:
  Basis basis_;
  Eigen::VectorXd h_;
  double step_;
};

struct ParametricUpdate {
  bool skipped = false;       // Xi Xi' too ill-conditioned
  double condition = 0.0;     // eigenvalue ratio of Xi Xi'
  double residual_norm = 0.0; // |Xi h - x_next| before the update
};

// h <- h - step * Xi' (Xi Xi')^{-1} (Xi h - x_next); skipped when cond(Xi Xi') > max_condition.
ParametricUpdate parametric_update(ParametricModel& model, std::span<const double> x, std::span<const double> u,
                                   std::span<const double> x_next, double max_condition = 1e12);

}  // namespace certrl
