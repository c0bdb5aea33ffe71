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

#include "certrl/barrier.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace certrl {

void BarrierSpec::validate() const {
  if (!value || !gradient) throw std::invalid_argument("barrier '" + name + "': value and gradient required");
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("barrier '" + name + "': eta must lie in (0, 1]");
  if (!(nu >= 0.0)) throw std::invalid_argument("barrier '" + name + "': nu must be nonnegative");
  if (!(rho1 >= 0.0)) throw std::invalid_argument("barrier '" + name + "': rho1 must be nonnegative");
  if (!(nu_b > 0.0)) throw std::invalid_argument("barrier '" + name + "': nu_b must be positive");
}

double dcbf_residual(const BarrierSpec& spec, std::span<const double> x, std::span<const double> x_next) {
  const double b = spec.value(x);
  return spec.value(x_next) - b + spec.eta * b;
}

double min_barrier(const std::vector<BarrierSpec>& barriers, std::span<const double> x) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : barriers) m = std::min(m, b.value(x));
  return m;
}

std::vector<BarrierSpec> interval_barriers(std::size_t state_dim, std::size_t coord, double lo, double hi,
                                           double eta) {
  if (coord >= state_dim) throw std::invalid_argument("interval barrier: coordinate out of range");
  if (!(lo < hi)) throw std::invalid_argument("interval barrier: need lo < hi");
  auto unit = [state_dim, coord](double sign) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(state_dim));
    g(static_cast<Eigen::Index>(coord)) = sign;
    return g;
  };
  BarrierSpec upper{"upper", state_dim, [hi, coord](std::span<const double> x) { return hi - x[coord]; },
                    [g = unit(-1.0)](std::span<const double>) { return g; }, eta};
  BarrierSpec lower{"lower", state_dim, [lo, coord](std::span<const double> x) { return x[coord] - lo; },
                    [g = unit(1.0)](std::span<const double>) { return g; }, eta};
  upper.validate();
  lower.validate();
  return {upper, lower};
}

std::vector<BarrierSpec> quadrotor_box(double limit, double eta) {
  return interval_barriers(2, 0, -limit, limit, eta);
}

BarrierSpec quadratic_ball(std::size_t state_dim, double radius, double eta) {
  if (!(radius > 0.0)) throw std::invalid_argument("quadratic ball: radius must be positive");
  const double r2 = radius * radius;
  BarrierSpec s{"ball", state_dim,
                [r2](std::span<const double> x) {
                  double n = 0.0;
                  for (double v : x) n += v * v;
                  return r2 - n;
                },
                [](std::span<const double> x) {
                  Eigen::VectorXd g(static_cast<Eigen::Index>(x.size()));
                  for (std::size_t i = 0; i < x.size(); ++i) g(static_cast<Eigen::Index>(i)) = -2.0 * x[i];
                  return g;
                },
                eta, 2.0};
  s.nu_b = 2.0 * radius;
  s.validate();
  return s;
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a + std::numbers::pi, two_pi);
  if (r < 0.0) r += two_pi;
  return r - std::numbers::pi;
}

double OrientationBarrier::target_heading(double px, double py) const {
  const Eigen::Vector2d g = base_gradient(px, py);
  return std::atan2(g.y(), g.x());
}

BarrierSpec OrientationBarrier::to_spec(double eta, double rho1) const {
  if (!base || !base_gradient) throw std::invalid_argument("orientation barrier: base and gradient required");
  if (!(upsilon > 0.0)) throw std::invalid_argument("orientation barrier: upsilon must be positive");
  const OrientationBarrier self = *this;
  BarrierSpec s;
  s.name = name;
  s.state_dim = 3;
  s.eta = eta;
  s.rho1 = rho1;
  s.value = [self](std::span<const double> x) {
    const double d = wrap_angle(x[2] - self.target_heading(x[0], x[1]));
    return self.base(x[0], x[1]) - self.upsilon * self.shape.value(std::fabs(d));
  };
  s.gradient = [self](std::span<const double> x) {
    const double d = wrap_angle(x[2] - self.target_heading(x[0], x[1]));
    const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    const double slope = self.upsilon * self.shape.derivative(std::fabs(d)) * sgn;
    // Heading sensitivity by central differences; zero for planar base barriers.
    constexpr double step = 1e-6;
    Eigen::Vector2d dtarget;
    dtarget.x() = wrap_angle(self.target_heading(x[0] + step, x[1]) - self.target_heading(x[0] - step, x[1])) /
                  (2.0 * step);
    dtarget.y() = wrap_angle(self.target_heading(x[0], x[1] + step) - self.target_heading(x[0], x[1] - step)) /
                  (2.0 * step);
    const Eigen::Vector2d gp = self.base_gradient(x[0], x[1]) + slope * dtarget;
    Eigen::VectorXd g(3);
    g << gp.x(), gp.y(), -slope;
    return g;
  };
  s.validate();
  return s;
}

std::vector<BarrierSpec> unicycle_oriented_box(double x_max, double y_max, double upsilon, double eta) {
  if (!(x_max > 0.0 && y_max > 0.0)) throw std::invalid_argument("oriented box: limits must be positive");
  auto wall = [&](std::string name, double cx, double cy, double off) {
    OrientationBarrier ob;
    ob.name = std::move(name);
    ob.base = [cx, cy, off](double px, double py) { return off + cx * px + cy * py; };
    ob.base_gradient = [cx, cy](double, double) { return Eigen::Vector2d(cx, cy); };
    ob.upsilon = upsilon;
    return ob.to_spec(eta);
  };
  return {wall("x_upper", -1.0, 0.0, x_max), wall("x_lower", 1.0, 0.0, x_max), wall("y_upper", 0.0, -1.0, y_max),
          wall("y_lower", 0.0, 1.0, y_max)};
}

std::vector<BarrierSpec> barrier_preset(const std::string& name, const nlohmann::json& params) {
  const double rho1 = params.value("rho1", 0.0);
  std::vector<BarrierSpec> out;
  if (name == "quadrotor_box") {
    out = quadrotor_box(params.value("limit", 3.0), params.value("eta", 0.01));
  } else if (name == "unicycle_oriented_box") {
    out = unicycle_oriented_box(params.value("x_max", 1.2), params.value("y_max", 1.2), params.value("upsilon", 0.1),
                                params.value("eta", 0.1));
  } else if (name == "quadratic_ball") {
    out = {quadratic_ball(params.value("state_dim", std::size_t{2}), params.value("radius", 1.0),
                          params.value("eta", 0.01))};
  } else {
    throw std::invalid_argument("unknown barrier preset '" + name + "'");
  }
  for (auto& b : out) {
    b.rho1 = rho1;
    b.validate();
  }
  return out;
}

bool InputBox::contains(const Eigen::VectorXd& u, double slack) const {
  if (u.size() != lo.size()) return false;
  return ((u.array() >= lo.array() - slack) && (u.array() <= hi.array() + slack)).all();
}

Eigen::VectorXd InputBox::clamp(const Eigen::VectorXd& u) const { return u.cwiseMax(lo).cwiseMin(hi); }

void InputBox::validate() const {
  if (lo.size() == 0 || lo.size() != hi.size()) throw std::invalid_argument("input box: bounds must match and be nonempty");
  if (!(lo.array() <= hi.array()).all()) throw std::invalid_argument("input box: lower bound exceeds upper bound");
}

void SafeInputProblem::validate() const {
  box.validate();
  if (f_hat.size() != x.size()) throw std::invalid_argument("safe input problem: f_hat length differs from state");
  if (g_hat.rows() != x.size() || g_hat.cols() != box.lo.size()) {
    throw std::invalid_argument("safe input problem: g_hat must be state_dim x input_dim");
  }
  for (const auto& b : barriers) {
    b.validate();
    if (b.state_dim != static_cast<std::size_t>(x.size())) {
      throw std::invalid_argument("safe input problem: barrier '" + b.name + "' has the wrong state dimension");
    }
  }
}

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double certified_margin(const SafeInputProblem& problem, const BarrierSpec& spec, const Eigen::VectorXd& u) {
  const Eigen::VectorXd step = problem.f_hat + problem.g_hat * u;
  const auto xs = as_span(problem.x);
  return spec.gradient(xs).dot(step) + spec.eta * spec.value(xs) - 0.5 * spec.nu * step.squaredNorm() - spec.rho1;
}

double min_certified_margin(const SafeInputProblem& problem, const Eigen::VectorXd& u) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : problem.barriers) m = std::min(m, certified_margin(problem, b, u));
  return m;
}

std::vector<QuadraticMargin> margin_forms(const SafeInputProblem& problem) {
  const auto xs = as_span(problem.x);
  const Eigen::MatrixXd& g = problem.g_hat;
  const Eigen::VectorXd& f = problem.f_hat;
  std::vector<QuadraticMargin> out;
  out.reserve(problem.barriers.size());
  for (const auto& b : problem.barriers) {
    const Eigen::VectorXd grad = b.gradient(xs);
    QuadraticMargin q;
    q.c0 = grad.dot(f) + b.eta * b.value(xs) - 0.5 * b.nu * f.squaredNorm() - b.rho1;
    q.lin = g.transpose() * grad - b.nu * (g.transpose() * f);
    q.quad = 0.5 * b.nu * (g.transpose() * g);
    out.push_back(std::move(q));
  }
  return out;
}

double lyapunov_value(std::span<const double> x, std::span<const double> h,
                      const std::function<double(std::span<const double>)>& omega_distance, double c,
                      const std::vector<BarrierSpec>& barriers) {
  if (!(c > 0.0)) throw std::invalid_argument("lyapunov value: c must be positive");
  const double b = barriers.empty() ? 0.0 : min_barrier(barriers, x);
  return -std::min(b, 0.0) + c * omega_distance(h);
}

}  // namespace certrl
