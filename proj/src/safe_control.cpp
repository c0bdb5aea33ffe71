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

#include <cmath>
#include <limits>
#include <stdexcept>

#include "certrl/barrier.hpp"

namespace certrl {

namespace {

constexpr double kGapTol = 1e-10;
constexpr double kBoundaryTol = 1e-10;
constexpr int kMaxNewton = 200;

// Margins restricted to u = base + P v, where P selects the coordinates with lo < hi.
struct Reduced {
  std::vector<QuadraticMargin> margins;
  Eigen::VectorXd lo, hi;  // bounds on v
  Eigen::VectorXd base;
  Eigen::MatrixXd select;  // n x k

  Eigen::VectorXd lift(const Eigen::VectorXd& v) const { return base + select * v; }
  std::size_t constraint_count() const { return margins.size() + 2 * static_cast<std::size_t>(lo.size()); }
};

Reduced reduce(const SafeInputProblem& problem) {
  const auto& box = problem.box;
  const Eigen::Index n = box.lo.size();
  std::vector<Eigen::Index> free;
  Reduced r;
  r.base = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (box.lo(j) < box.hi(j)) {
      free.push_back(j);
    } else {
      r.base(j) = box.lo(j);
    }
  }
  const auto k = static_cast<Eigen::Index>(free.size());
  r.select = Eigen::MatrixXd::Zero(n, k);
  r.lo.resize(k);
  r.hi.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    r.select(free[static_cast<std::size_t>(i)], i) = 1.0;
    r.lo(i) = box.lo(free[static_cast<std::size_t>(i)]);
    r.hi(i) = box.hi(free[static_cast<std::size_t>(i)]);
  }
  for (const auto& m : margin_forms(problem)) {
    QuadraticMargin q;
    q.c0 = m.c0 + m.lin.dot(r.base) - r.base.dot(m.quad * r.base);
    q.lin = r.select.transpose() * (m.lin - 2.0 * m.quad * r.base);
    q.quad = r.select.transpose() * m.quad * r.select;
    r.margins.push_back(std::move(q));
  }
  return r;
}

struct Eval {
  bool inside = false;
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Log-barrier objective over y = [v] (phase II) or y = [v; s] (phase I).
// Phase II: t b'v + sum log m_i(v) + box logs. Phase I: t s + sum log(m_i(v) - s) + box logs.
Eval evaluate(const Reduced& r, const Eigen::VectorXd& y, double t, const Eigen::VectorXd& b, bool phase1,
              bool derivatives) {
  const Eigen::Index k = r.lo.size();
  const Eigen::VectorXd v = y.head(k);
  const double s = phase1 ? y(k) : 0.0;
  Eval e;
  const Eigen::Index dim = y.size();
  if (derivatives) {
    e.grad = Eigen::VectorXd::Zero(dim);
    e.hess = Eigen::MatrixXd::Zero(dim, dim);
  }
  double val = phase1 ? t * s : t * b.dot(v);
  if (derivatives) {
    if (phase1) {
      e.grad(k) = t;
    } else {
      e.grad.head(k) = t * b;
    }
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const double a = v(j) - r.lo(j), c = r.hi(j) - v(j);
    if (!(a > 0.0 && c > 0.0)) return e;
    val += std::log(a) + std::log(c);
    if (derivatives) {
      e.grad(j) += 1.0 / a - 1.0 / c;
      e.hess(j, j) -= 1.0 / (a * a) + 1.0 / (c * c);
    }
  }
  for (const auto& m : r.margins) {
    const double slack = m(v) - s;
    if (!(slack > 0.0)) return e;
    val += std::log(slack);
    if (derivatives) {
      Eigen::VectorXd dm = Eigen::VectorXd::Zero(dim);
      dm.head(k) = m.lin - 2.0 * m.quad * v;
      if (phase1) dm(k) = -1.0;
      e.grad += dm / slack;
      e.hess -= dm * dm.transpose() / (slack * slack);
      e.hess.topLeftCorner(k, k) -= 2.0 * m.quad / slack;
    }
  }
  if (!std::isfinite(val)) return e;
  e.inside = true;
  e.value = val;
  return e;
}

// Damped Newton ascent to the center for fixed t. Returns the number of steps taken.
int center(const Reduced& r, Eigen::VectorXd& y, double t, const Eigen::VectorXd& b, bool phase1,
           const std::function<bool(const Eigen::VectorXd&)>& stop_early) {
  int steps = 0;
  for (; steps < kMaxNewton; ++steps) {
    const Eval e = evaluate(r, y, t, b, phase1, true);
    if (!e.inside) break;
    const Eigen::MatrixXd neg = -e.hess;
    const Eigen::VectorXd d = neg.ldlt().solve(e.grad);
    const double dec = e.grad.dot(d);
    if (!std::isfinite(dec) || dec <= 0.0 || 0.5 * dec < 1e-14) break;
    double alpha = 1.0;
    bool moved = false;
    while (alpha > 1e-16) {
      const Eigen::VectorXd cand = y + alpha * d;
      const Eval ec = evaluate(r, cand, t, b, phase1, false);
      if (ec.inside && ec.value >= e.value + 0.25 * alpha * dec) {
        y = cand;
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) break;
    if (stop_early && stop_early(y)) return steps + 1;
  }
  return steps;
}

double min_reduced_margin(const Reduced& r, const Eigen::VectorXd& v) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& q : r.margins) m = std::min(m, q(v));
  return m;
}

void finish(const SafeInputProblem& problem, const Eigen::VectorXd& b, SafeControlResult& res) {
  res.min_margin = min_certified_margin(problem, res.u);
  res.objective = b.dot(res.u);
}

}  // namespace

SafeControlResult solve_safe_control(const SafeInputProblem& problem, const Eigen::VectorXd& b) {
  problem.validate();
  if (b.size() != problem.box.lo.size()) throw std::invalid_argument("safe control: objective length mismatch");
  SafeControlResult res;
  const InputBox& box = problem.box;

  if (problem.barriers.empty()) {
    res.u = box.midpoint();
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      if (b(j) > 0.0) res.u(j) = box.hi(j);
      if (b(j) < 0.0) res.u(j) = box.lo(j);
    }
    res.feasible = true;
    finish(problem, b, res);
    return res;
  }

  const bool flat = b.isZero(0.0);
  if (flat) {
    const Eigen::VectorXd mid = box.midpoint();
    if (min_certified_margin(problem, mid) >= 0.0) {
      res.u = mid;
      res.feasible = true;
      finish(problem, b, res);
      return res;
    }
  }

  const Reduced r = reduce(problem);
  const Eigen::Index k = r.lo.size();
  const Eigen::VectorXd bv = r.select.transpose() * b;
  const double nc = static_cast<double>(r.constraint_count());
  Eigen::VectorXd v = 0.5 * (r.lo + r.hi);

  if (k == 0) {
    res.u = r.base;
    res.feasible = min_certified_margin(problem, res.u) >= -kBoundaryTol;
    finish(problem, b, res);
    return res;
  }

  // Phase I: maximize the smallest margin until it turns positive or is certified negative.
  if (!(min_reduced_margin(r, v) > 0.0)) {
    Eigen::VectorXd y(k + 1);
    y.head(k) = v;
    y(k) = min_reduced_margin(r, v) - 1.0;
    auto positive = [&r, k](const Eigen::VectorXd& yy) { return min_reduced_margin(r, yy.head(k)) > 0.0; };
    bool found = false;
    for (double t = 1.0;; t *= 10.0) {
      res.newton_steps += center(r, y, t, bv, true, positive);
      const double best = min_reduced_margin(r, y.head(k));
      if (best > 0.0) {
        found = true;
        break;
      }
      // Once infeasibility is certified keep tightening, so the witness approaches the
      // least-violating input rather than an early central-path point.
      if (nc / t < kGapTol * 1e-2) break;
    }
    v = y.head(k);
    if (!found) {
      res.u = r.lift(v);
      finish(problem, b, res);
      res.feasible = res.min_margin >= -kBoundaryTol;
      return res;
    }
  }

  // Phase II: central path toward the maximizer of b'v, or the analytic center when b = 0.
  if (flat) {
    res.newton_steps += center(r, v, 0.0, bv, false, nullptr);
  } else {
    const double scale = std::max(bv.norm(), 1e-300);
    for (double t = 1.0 / scale; nc / t > kGapTol; t *= 20.0) {
      res.newton_steps += center(r, v, t, bv, false, nullptr);
    }
  }
  res.u = r.lift(v);
  res.feasible = true;
  finish(problem, b, res);
  return res;
}

SafeControlResult sample_safe_input(const SafeInputProblem& problem, std::mt19937_64& rng, int max_draws) {
  problem.validate();
  const InputBox& box = problem.box;
  const auto forms = margin_forms(problem);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index n = box.lo.size();
  Eigen::VectorXd u(n);
  SafeControlResult res;
  for (int d = 0; d < max_draws; ++d) {
    for (Eigen::Index j = 0; j < n; ++j) u(j) = box.lo(j) + (box.hi(j) - box.lo(j)) * unit(rng);
    res.draws = d + 1;
    bool ok = true;
    for (const auto& q : forms) {
      if (q(u) < 0.0) {
        ok = false;
        break;
      }
    }
    if (ok) {
      res.u = u;
      res.feasible = true;
      res.min_margin = min_certified_margin(problem, u);
      return res;
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd b(n);
  for (Eigen::Index j = 0; j < n; ++j) b(j) = normal(rng);
  const int draws = res.draws;
  res = solve_safe_control(problem, b);
  res.draws = draws;
  res.used_fallback = true;
  return res;
}

}  // namespace certrl
