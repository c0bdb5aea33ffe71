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

#include "certrl/structmodel.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "certrl/simd.hpp"

namespace certrl {

const char* block_name(ModelBlock b) {
  switch (b) {
    case ModelBlock::p: return "p";
    case ModelBlock::f: return "f";
    case ModelBlock::g: return "g";
  }
  return "?";
}

std::vector<BlockKernel> default_block_kernels(std::size_t n_x, std::size_t n_u, std::span<const double> sigmas,
                                               double tau) {
  if (n_x == 0 || n_u == 0) throw std::invalid_argument("structured model: dimensions must be positive");
  std::vector<std::size_t> state_idx(n_x);
  std::iota(state_idx.begin(), state_idx.end(), 0);
  std::vector<BlockKernel> out;
  for (double s : sigmas) {
    out.push_back({ModelBlock::p, KernelSpec::weighted(tau, KernelSpec::gaussian(s, n_x + n_u))});
    out.push_back({ModelBlock::f, KernelSpec::weighted(tau, KernelSpec::select(state_idx, KernelSpec::gaussian(s, n_x)))});
    out.push_back({ModelBlock::g, KernelSpec::tensor(KernelSpec::gaussian(s, n_x), KernelSpec::linear(), n_x)});
  }
  return out;
}

StructuredModel::StructuredModel(std::size_t n_x, std::size_t n_u, std::vector<std::vector<BlockKernel>> kernels,
                                 std::vector<ApfbsConfig> configs, std::vector<std::size_t> r_max)
    : n_x_(n_x), n_u_(n_u), configs_(std::move(configs)) {
  if (n_x == 0 || n_u == 0) throw std::invalid_argument("structured model: dimensions must be positive");
  if (kernels.size() != n_x || configs_.size() != n_x || r_max.size() != n_x) {
    throw std::invalid_argument("structured model: need one kernel list, config and cap per state dimension");
  }
  for (std::size_t i = 0; i < n_x; ++i) {
    configs_[i].validate();
    if (kernels[i].empty()) throw std::invalid_argument("structured model: empty kernel list");
    Dictionary d(r_max[i]);
    for (auto& bk : kernels[i]) d.add_kernel(bk.kernel, n_x + n_u, static_cast<int>(bk.block));
    filters_.emplace_back(std::move(d));
    windows_.emplace_back(configs_[i].window);
  }
}

StructuredModel StructuredModel::uniform(std::size_t n_x, std::size_t n_u, std::vector<BlockKernel> kernels,
                                         const ApfbsConfig& config, std::size_t r_max) {
  return StructuredModel(n_x, n_u, std::vector<std::vector<BlockKernel>>(n_x, kernels),
                         std::vector<ApfbsConfig>(n_x, config), std::vector<std::size_t>(n_x, r_max));
}

ModelBlock StructuredModel::block_of(std::size_t i, std::size_t m) const {
  return static_cast<ModelBlock>(filters_.at(i).dict.block(m).tag);
}

std::vector<double> StructuredModel::join(std::span<const double> x, std::span<const double> u) const {
  if (x.size() != n_x_ || u.size() != n_u_) {
    throw std::invalid_argument("structured model: expected state of length " + std::to_string(n_x_) +
                                " and input of length " + std::to_string(n_u_));
  }
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), u.begin(), u.end());
  return z;
}

double StructuredModel::block_predict(std::size_t i, ModelBlock b, std::span<const double> z) const {
  const auto& fs = filters_.at(i);
  double y = 0.0;
  for (std::size_t m = 0; m < fs.dict.num_kernels(); ++m) {
    if (block_of(i, m) != b || fs.h[m].empty()) continue;
    y += simd::dot(fs.h[m], fs.block_kernel_vector(m, z));
  }
  return y;
}

std::vector<double> predict_delta(const StructuredModel& model, std::span<const double> x,
                                  std::span<const double> u) {
  const auto z = model.join(x, u);
  std::vector<double> out(model.state_dim());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(model.filter(i), z);
  return out;
}

StructuredModel update_structured(StructuredModel model, std::span<const double> x, std::span<const double> u,
                                  std::span<const double> x_next) {
  const auto z = model.join(x, u);
  if (x_next.size() != model.n_x_) throw std::invalid_argument("structured model: next state length mismatch");
  for (std::size_t i = 0; i < model.n_x_; ++i) {
    adapt(model.filters_[i], model.windows_[i], z, x_next[i] - x[i], model.configs_[i]);
  }
  return model;
}

AffineExtract extract_affine(const StructuredModel& model, std::span<const double> x) {
  const std::size_t n_x = model.state_dim(), n_u = model.input_dim();
  std::vector<double> zero_u(n_u, 0.0);
  auto z = model.join(x, zero_u);
  AffineExtract out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_x)),
                    Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_x), static_cast<Eigen::Index>(n_u))};
  for (std::size_t i = 0; i < n_x; ++i) {
    out.f_hat(static_cast<Eigen::Index>(i)) = model.block_predict(i, ModelBlock::f, z);
    for (std::size_t j = 0; j < n_u; ++j) {
      z[n_x + j] = 1.0;
      out.g_hat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = model.block_predict(i, ModelBlock::g, z);
      z[n_x + j] = 0.0;
    }
  }
  return out;
}

nlohmann::json StructuredModel::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (std::size_t i = 0; i < n_x_; ++i) {
    const auto& c = configs_[i];
    dims.push_back({{"filter", filters_[i].to_json()},
                    {"config",
                     {{"step", c.step}, {"window", c.window}, {"l1", c.l1}, {"slab", c.slab}, {"novelty", c.novelty}}}});
  }
  return {{"n_x", n_x_}, {"n_u", n_u_}, {"dims", dims}};
}

StructuredModel StructuredModel::from_json(const nlohmann::json& j) {
  StructuredModel m;
  m.n_x_ = j.at("n_x").get<std::size_t>();
  m.n_u_ = j.at("n_u").get<std::size_t>();
  for (const auto& d : j.at("dims")) {
    const auto& c = d.at("config");
    ApfbsConfig cfg{c.at("step").get<double>(), c.at("window").get<std::size_t>(), c.at("l1").get<double>(),
                    c.at("slab").get<double>(), c.at("novelty").get<double>()};
    cfg.validate();
    m.filters_.push_back(FilterState::from_json(d.at("filter")));
    m.windows_.emplace_back(cfg.window);
    m.configs_.push_back(cfg);
  }
  if (m.filters_.size() != m.n_x_) throw std::invalid_argument("structured model checkpoint: dimension count mismatch");
  return m;
}

double SparsityReport::total_mass(ModelBlock b) const {
  double s = 0.0;
  for (const auto& row : mass) s += row[static_cast<int>(b)];
  return s;
}

double SparsityReport::p_over_g() const {
  const double p = total_mass(ModelBlock::p), g = total_mass(ModelBlock::g);
  if (g == 0.0) return p == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return p / g;
}

nlohmann::json SparsityReport::to_json() const {
  nlohmann::json dims = nlohmann::json::array();
  for (std::size_t i = 0; i < mass.size(); ++i) {
    dims.push_back({{"p_mass", mass[i][0]},
                    {"f_mass", mass[i][1]},
                    {"g_mass", mass[i][2]},
                    {"p_atoms", atoms[i][0]},
                    {"f_atoms", atoms[i][1]},
                    {"g_atoms", atoms[i][2]}});
  }
  return {{"dims", dims}, {"p_over_g", p_over_g()}};
}

SparsityReport sparsity_report(const StructuredModel& model) {
  SparsityReport r;
  for (std::size_t i = 0; i < model.state_dim(); ++i) {
    std::array<double, 3> mass{};
    std::array<std::size_t, 3> atoms{};
    const auto& fs = model.filter(i);
    for (std::size_t m = 0; m < fs.dict.num_kernels(); ++m) {
      const int b = static_cast<int>(model.block_of(i, m));
      for (double v : fs.h[m]) mass[b] += std::fabs(v);
      atoms[b] += fs.h[m].size();
    }
    r.mass.push_back(mass);
    r.atoms.push_back(atoms);
  }
  return r;
}

ParametricModel::ParametricModel(Basis basis, Eigen::VectorXd h0, double step)
    : basis_(std::move(basis)), h_(std::move(h0)), step_(step) {
  if (!basis_) throw std::invalid_argument("parametric model: basis evaluator required");
  if (!(step > 0.0 && step < 2.0)) throw std::invalid_argument("parametric model: step size must lie in (0, 2)");
}

Eigen::VectorXd ParametricModel::predict(std::span<const double> x, std::span<const double> u) const {
  return basis_(x, u) * h_;
}

ParametricUpdate parametric_update(ParametricModel& model, std::span<const double> x, std::span<const double> u,
                                   std::span<const double> x_next, double max_condition) {
  const Eigen::MatrixXd xi = model.basis(x, u);
  if (xi.cols() != model.coefficients().size() || xi.rows() != static_cast<Eigen::Index>(x_next.size())) {
    throw std::invalid_argument("parametric model: basis shape mismatch");
  }
  const Eigen::Map<const Eigen::VectorXd> target(x_next.data(), static_cast<Eigen::Index>(x_next.size()));
  const Eigen::VectorXd residual = xi * model.coefficients() - target;
  ParametricUpdate out;
  out.residual_norm = residual.norm();

  const Eigen::MatrixXd gram = xi * xi.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  out.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(out.condition <= max_condition)) {
    out.skipped = true;
    return out;
  }
  const Eigen::VectorXd w = gram.ldlt().solve(residual);
  model.set_coefficients(model.coefficients() - model.step() * (xi.transpose() * w));
  return out;
}

}  // namespace certrl
