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

#include "certrl/valuerl.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "certrl/simd.hpp"

namespace certrl {

QKernelSpec QKernelSpec::ladder(std::size_t n_x, std::size_t n_u, std::span<const double> sigmas, double gamma) {
  if (sigmas.empty()) throw std::invalid_argument("value kernel: empty scale ladder");
  std::vector<KernelSpec> ks;
  for (double s : sigmas) ks.push_back(KernelSpec::tensor(KernelSpec::gaussian(s, n_x), KernelSpec::affine_input(), n_x));
  return QKernelSpec(n_x, n_u, std::move(ks), gamma);
}

QKernelSpec::QKernelSpec(std::size_t n_x, std::size_t n_u, std::vector<KernelSpec> value_kernels, double gamma)
    : n_x_(n_x), n_u_(n_u), value_(std::move(value_kernels)), gamma_(gamma) {
  if (n_x == 0 || n_u == 0) throw std::invalid_argument("value kernel: dimensions must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("value kernel: gamma must lie in (0, 1)");
  if (value_.empty()) throw std::invalid_argument("value kernel: at least one kernel required");
  for (const auto& k : value_) {
    k.check_input(n_x + n_u);
    paired_.push_back(KernelSpec::paired(gamma, k, n_x + n_u));
  }
}

bool QKernelSpec::same_as(const QKernelSpec& other) const {
  if (n_x_ != other.n_x_ || n_u_ != other.n_u_ || gamma_ != other.gamma_ || value_.size() != other.value_.size()) {
    return false;
  }
  for (std::size_t m = 0; m < value_.size(); ++m) {
    if (value_[m].to_json() != other.value_[m].to_json()) return false;
  }
  return true;
}

nlohmann::json QKernelSpec::to_json() const {
  nlohmann::json ks = nlohmann::json::array();
  for (const auto& k : value_) ks.push_back(k.to_json());
  return {{"n_x", n_x_}, {"n_u", n_u_}, {"gamma", gamma_}, {"kernels", ks}};
}

QKernelSpec QKernelSpec::from_json(const nlohmann::json& j) {
  std::vector<KernelSpec> ks;
  for (const auto& k : j.at("kernels")) ks.push_back(KernelSpec::from_json(k));
  return QKernelSpec(j.at("n_x").get<std::size_t>(), j.at("n_u").get<std::size_t>(), std::move(ks),
                     j.at("gamma").get<double>());
}

double paired_kernel_eval(const QKernelSpec& spec, std::size_t m, std::span<const double> zw,
                          std::span<const double> zw_tilde) {
  return eval_kernel(spec.paired_kernel(m), zw, zw_tilde);
}

namespace {

FilterState empty_filter(const QKernelSpec& spec, std::size_t r_max) {
  Dictionary d(r_max);
  for (std::size_t m = 0; m < spec.num_kernels(); ++m) {
    d.add_kernel(spec.paired_kernel(m), 2 * spec.pair_dim(), static_cast<int>(m));
  }
  return FilterState(std::move(d));
}

}  // namespace

QModel::QModel(QKernelSpec spec, ApfbsConfig config, std::size_t r_max)
    : spec_(std::move(spec)), config_(config), filter_(empty_filter(spec_, r_max)), window_(config.window) {
  config_.validate();
}

nlohmann::json QModel::to_json() const {
  return {{"spec", spec_.to_json()},
          {"config",
           {{"step", config_.step},
            {"window", config_.window},
            {"l1", config_.l1},
            {"slab", config_.slab},
            {"novelty", config_.novelty}}},
          {"filter", filter_.to_json()}};
}

QModel QModel::from_json(const nlohmann::json& j) {
  const auto& c = j.at("config");
  ApfbsConfig cfg{c.at("step").get<double>(), c.at("window").get<std::size_t>(), c.at("l1").get<double>(),
                  c.at("slab").get<double>(), c.at("novelty").get<double>()};
  FilterState f = FilterState::from_json(j.at("filter"));
  QModel m(QKernelSpec::from_json(j.at("spec")), cfg, f.dict.max_size());
  if (f.dict.num_kernels() != m.spec_.num_kernels()) throw std::invalid_argument("value model checkpoint: kernel count mismatch");
  m.filter_ = std::move(f);
  return m;
}

double q_predict(const QKernelSpec& spec, const FilterState& filter, std::span<const double> z) {
  const std::size_t nz = spec.pair_dim();
  if (z.size() != nz) throw std::invalid_argument("q_predict: expected a state-input pair of length " + std::to_string(nz));
  double q = 0.0;
  std::vector<double> kz, kw;
  for (std::size_t m = 0; m < filter.dict.num_kernels(); ++m) {
    const auto& hm = filter.h[m];
    if (hm.empty()) continue;
    const auto cols = filter.dict.block(m).centers.columns();
    const std::span<const std::span<const double>> all(cols);
    kz.assign(hm.size(), 0.0);
    kw.assign(hm.size(), 0.0);
    eval_batch(spec.value_kernel(m), z, all.first(nz), kz);
    eval_batch(spec.value_kernel(m), z, all.subspan(nz), kw);
    simd::axpy(-spec.gamma(), kw, kz);
    q += simd::dot(hm, kz);
  }
  return q;
}

double q_predict(const QModel& model, std::span<const double> z) { return q_predict(model.spec(), model.filter(), z); }

double psi_predict(const QModel& model, std::span<const double> z, std::span<const double> w) {
  std::vector<double> zw(z.begin(), z.end());
  zw.insert(zw.end(), w.begin(), w.end());
  return predict(model.filter(), zw);
}

QModel q_update(QModel model, std::span<const double> z, std::span<const double> z_next, double reward) {
  const std::size_t nz = model.spec_.pair_dim();
  if (z.size() != nz || z_next.size() != nz) throw std::invalid_argument("q_update: state-input pair length mismatch");
  std::vector<double> zw(z.begin(), z.end());
  zw.insert(zw.end(), z_next.begin(), z_next.end());
  adapt(model.filter_, model.window_, zw, reward, model.config_);
  return model;
}

InputMap InputMap::centered(const InputBox& box) {
  InputMap m;
  m.center = box.midpoint();
  m.scale = (0.5 * (box.hi - box.lo)).cwiseInverse();
  if (!m.scale.allFinite()) throw std::invalid_argument("input map: box has a degenerate coordinate");
  return m;
}

Policy::Policy(QKernelSpec spec, FilterState snapshot, InputMap inputs)
    : spec_(std::make_shared<const QKernelSpec>(std::move(spec))),
      snapshot_(std::make_shared<const FilterState>(std::move(snapshot))),
      inputs_(std::move(inputs)) {
  const auto nu = static_cast<Eigen::Index>(spec_->input_dim());
  if (!inputs_.identity() && (inputs_.scale.size() != nu || inputs_.center.size() != nu)) {
    throw std::invalid_argument("policy: input map has the wrong length");
  }
}

AffineObjective Policy::objective(std::span<const double> x) const {
  AffineObjective o;
  if (!spec_) throw std::logic_error("policy: not initialized");
  const std::size_t nx = spec_->state_dim(), nu = spec_->input_dim();
  if (x.size() != nx) throw std::invalid_argument("policy: state length mismatch");
  o.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nu));
  if (empty()) return o;
  std::vector<double> z(x.begin(), x.end());
  z.resize(nx + nu, 0.0);
  o.a = q_predict(*spec_, *snapshot_, z);
  for (std::size_t i = 0; i < nu; ++i) {
    z[nx + i] = 1.0;
    o.b(static_cast<Eigen::Index>(i)) = q_predict(*spec_, *snapshot_, z) - o.a;
    z[nx + i] = 0.0;
  }
  // Q = a + b'(s o (u - c)) = (a - b'(s o c)) + (s o b)'u
  if (!inputs_.identity()) {
    o.b = o.b.cwiseProduct(inputs_.scale);
    o.a -= o.b.dot(inputs_.center);
  }
  return o;
}

double Policy::value(std::span<const double> x, std::span<const double> u) const {
  if (empty()) return 0.0;
  const Eigen::VectorXd um =
      inputs_.apply(Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size())));
  std::vector<double> z(x.begin(), x.end());
  z.insert(z.end(), um.data(), um.data() + um.size());
  return q_predict(*spec_, *snapshot_, z);
}

SafeControlResult Policy::act(const SafeInputProblem& problem) const {
  const auto obj = objective({problem.x.data(), static_cast<std::size_t>(problem.x.size())});
  return solve_safe_control(problem, obj.b);
}

Policy improve_policy(const QModel& model, const InputMap& inputs) { return Policy(model.spec(), model.filter(), inputs); }

namespace {

// Squared norm of sum_j c_j k(., p_j).
double quad_form(const KernelSpec& k, const std::vector<std::vector<double>>& pts, const Eigen::VectorXd& c) {
  if (pts.empty()) return 0.0;
  const Eigen::MatrixXd g = gram_matrix(k, pts);
  return c.dot(g * c);
}

}  // namespace

RkhsNorms rkhs_norms(const QModel& a, const QModel& b) {
  if (!a.spec().same_as(b.spec())) throw std::invalid_argument("rkhs_norms: models use different value kernels");
  const auto& spec = a.spec();
  const std::size_t nz = spec.pair_dim();
  const double g = spec.gamma();
  double psi2 = 0.0, q2 = 0.0;
  for (std::size_t m = 0; m < spec.num_kernels(); ++m) {
    std::vector<std::vector<double>> pairs, points;
    std::vector<double> coef;
    // Atoms shared by both models are merged so equal expansions cancel exactly.
    std::map<std::vector<double>, std::size_t> index;
    auto collect = [&](const QModel& model, double sign) {
      const auto& f = model.filter();
      const auto& store = f.dict.block(m).centers;
      for (std::size_t j = 0; j < store.size(); ++j) {
        auto c = store.center(j);
        const auto [it, fresh] = index.emplace(c, pairs.size());
        if (fresh) {
          pairs.push_back(std::move(c));
          coef.push_back(sign * f.h[m][j]);
        } else {
          coef[it->second] += sign * f.h[m][j];
        }
      }
    };
    collect(a, 1.0);
    collect(b, -1.0);
    const auto r = static_cast<Eigen::Index>(coef.size());
    const Eigen::Map<const Eigen::VectorXd> c(coef.data(), r);
    psi2 += quad_form(spec.paired_kernel(m), pairs, c);

    Eigen::VectorXd cq(2 * r);
    for (const auto& p : pairs) points.emplace_back(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nz));
    for (const auto& p : pairs) points.emplace_back(p.begin() + static_cast<std::ptrdiff_t>(nz), p.end());
    cq.head(r) = c;
    cq.tail(r) = -g * c;
    q2 += quad_form(spec.value_kernel(m), points, cq);
  }
  return {std::sqrt(std::max(psi2, 0.0)), std::sqrt(std::max(q2, 0.0))};
}

}  // namespace certrl
