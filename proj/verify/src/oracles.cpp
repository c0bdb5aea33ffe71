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

#include "certrl_verify/oracles.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace certrl::oracle {

double soft_threshold_grid(double v, double t, double step) {
  const double r = std::fabs(v) + 1.0;
  const auto n = static_cast<long>(std::ceil(2.0 * r / step));
  double best = 0.0, best_cost = std::numeric_limits<double>::infinity();
  for (long i = 0; i <= n; ++i) {
    const double x = -r + static_cast<double>(i) * step;
    const double cost = 0.5 * (x - v) * (x - v) + t * std::fabs(x);
    if (cost < best_cost) {
      best_cost = cost;
      best = x;
    }
  }
  // The grid may straddle zero; zero itself is a candidate of the true problem.
  if (0.5 * v * v <= best_cost) best = 0.0;
  return best;
}

Posterior gp_sarsa_dense(const GpSarsaState& st, const std::vector<double>& query) {
  const std::size_t n = st.rewards.size();
  const std::size_t m = st.z.size();
  if (m != n + 1) throw std::invalid_argument("oracle: need N + 1 inputs for N rewards");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = -st.gamma;
  }
  Eigen::MatrixXd k(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  Eigen::VectorXd kq(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    kq(static_cast<Eigen::Index>(i)) = eval_kernel(st.kernel, query, st.z[i]);
    for (std::size_t j = 0; j < m; ++j) {
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = eval_kernel(st.kernel, st.z[i], st.z[j]);
    }
  }
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = st.noise[i];
    r(static_cast<Eigen::Index>(i)) = st.rewards[i];
  }
  const Eigen::MatrixXd a = h * k * h.transpose() + sigma;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::VectorXd hk = h * kq;
  Posterior p;
  p.mean = hk.dot(lu.solve(r));
  p.variance = eval_kernel(st.kernel, query, query) - hk.dot(lu.solve(hk));
  return p;
}

double margin(const SafeInputProblem& problem, const BarrierSpec& barrier, const Eigen::VectorXd& u) {
  const std::span<const double> x(problem.x.data(), static_cast<std::size_t>(problem.x.size()));
  const Eigen::VectorXd d = problem.f_hat + problem.g_hat * u;
  return barrier.gradient(x).dot(d) + barrier.eta * barrier.value(x) - 0.5 * barrier.nu * d.squaredNorm() - barrier.rho1;
}

GridOptimum safe_control_grid(const SafeInputProblem& problem, const Eigen::Vector2d& b, double resolution) {
  if (problem.box.lo.size() != 2) throw std::invalid_argument("oracle grid: two inputs required");
  GridOptimum best;
  best.objective = -std::numeric_limits<double>::infinity();
  const auto steps = [&](int i) {
    return static_cast<long>(std::floor((problem.box.hi(i) - problem.box.lo(i)) / resolution + 1e-9));
  };
  const long n0 = steps(0), n1 = steps(1);
  // Margins are quadratic in u; expand them once so the sweep is cheap.
  struct Form {
    double c0, l0, l1, q00, q01, q11;
  };
  std::vector<Form> forms;
  for (const auto& bar : problem.barriers) {
    const Eigen::Vector2d e0(1.0, 0.0), e1(0.0, 1.0);
    const double m0 = margin(problem, bar, Eigen::Vector2d::Zero());
    const double ma = margin(problem, bar, e0), mb = margin(problem, bar, -e0);
    const double mc = margin(problem, bar, e1), md = margin(problem, bar, -e1);
    const double me = margin(problem, bar, e0 + e1);
    Form f;
    f.c0 = m0;
    f.l0 = 0.5 * (ma - mb);
    f.l1 = 0.5 * (mc - md);
    f.q00 = 0.5 * (ma + mb) - m0;
    f.q11 = 0.5 * (mc + md) - m0;
    f.q01 = me - m0 - f.l0 - f.l1 - f.q00 - f.q11;
    forms.push_back(f);
  }
  for (long i = 0; i <= n0; ++i) {
    const double u0 = problem.box.lo(0) + static_cast<double>(i) * resolution;
    for (long j = 0; j <= n1; ++j) {
      const double u1 = problem.box.lo(1) + static_cast<double>(j) * resolution;
      const double obj = b(0) * u0 + b(1) * u1;
      if (obj <= best.objective) continue;
      bool ok = true;
      for (const auto& f : forms) {
        if (f.c0 + f.l0 * u0 + f.l1 * u1 + f.q00 * u0 * u0 + f.q01 * u0 * u1 + f.q11 * u1 * u1 < 0.0) {
          ok = false;
          break;
        }
      }
      if (ok) {
        best.feasible = true;
        best.objective = obj;
        best.u = Eigen::Vector2d(u0, u1);
      }
    }
  }
  return best;
}

namespace {

double block_norm_sq(const KernelSpec& kernel, const std::vector<std::vector<double>>& centers,
                     const std::vector<double>& coef) {
  double s = 0.0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    for (std::size_t j = 0; j < centers.size(); ++j) s += coef[i] * coef[j] * eval_kernel(kernel, centers[i], centers[j]);
  }
  return s;
}

}  // namespace

RkhsNorms rkhs_norms_dense(const QModel& a, const QModel& b) {
  const QKernelSpec& spec = a.spec();
  if (!spec.same_as(b.spec())) throw std::invalid_argument("oracle: value models use different kernels");
  const std::size_t half = spec.pair_dim();
  const double g = spec.gamma();
  double psi = 0.0, q = 0.0;
  for (std::size_t m = 0; m < spec.num_kernels(); ++m) {
    std::vector<std::vector<double>> paired, single;
    std::vector<double> pc, qc;
    for (int side = 0; side < 2; ++side) {
      const FilterState& f = side == 0 ? a.filter() : b.filter();
      const double sign = side == 0 ? 1.0 : -1.0;
      const auto& block = f.dict.block(m);
      for (std::size_t j = 0; j < block.centers.size(); ++j) {
        const std::vector<double> c = block.centers.center(j);
        const double h = sign * f.h[m][j];
        paired.push_back(c);
        pc.push_back(h);
        single.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        qc.push_back(h);
        single.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(half), c.end());
        qc.push_back(-g * h);
      }
    }
    psi += block_norm_sq(spec.paired_kernel(m), paired, pc);
    q += block_norm_sq(spec.value_kernel(m), single, qc);
  }
  return {std::sqrt(std::max(psi, 0.0)), std::sqrt(std::max(q, 0.0))};
}

double rollout_value(const std::vector<double>& rewards, const std::function<std::size_t(std::size_t)>& next,
                     std::size_t start, double gamma, std::size_t horizon) {
  double v = 0.0, disc = 1.0;
  std::size_t s = start;
  for (std::size_t t = 0; t < horizon; ++t) {
    v += disc * rewards.at(s);
    disc *= gamma;
    s = next(s);
  }
  return v;
}

}  // namespace certrl::oracle
