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

#include "certrl/kernels.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "certrl/simd.hpp"

namespace certrl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double gaussian_prefactor(double sigma, std::size_t dim) {
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * static_cast<double>(dim));
}

double eval_unchecked(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  return std::visit(
      overloaded{
          [&](const kernel::Gaussian& g) {
            double sq = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
              const double d = a[i] - b[i];
              sq += d * d;
            }
            return gaussian_prefactor(g.sigma, g.dim) * std::exp(-sq / (2.0 * g.sigma * g.sigma));
          },
          [&](const kernel::Polynomial& p) {
            double s = p.c;
            for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
            return p.degree == 1 ? s : std::pow(s, p.degree);
          },
          [&](const kernel::Constant&) { return 1.0; },
          [&](const kernel::Weighted& w) { return w.tau * eval_unchecked(w.inner, a, b); },
          [&](const kernel::Tensor& t) {
            return eval_unchecked(t.left, a.first(t.split), b.first(t.split)) *
                   eval_unchecked(t.right, a.subspan(t.split), b.subspan(t.split));
          },
          [&](const kernel::Select& s) {
            std::vector<double> sa, sb;
            sa.reserve(s.indices.size());
            sb.reserve(s.indices.size());
            for (std::size_t i : s.indices) {
              sa.push_back(a[i]);
              sb.push_back(b[i]);
            }
            return eval_unchecked(s.inner, sa, sb);
          },
          [&](const kernel::Paired& p) {
            const auto z = a.first(p.half), w = a.subspan(p.half);
            const auto zt = b.first(p.half), wt = b.subspan(p.half);
            const double g = p.gamma;
            return (eval_unchecked(p.inner, z, zt) - g * eval_unchecked(p.inner, z, wt)) -
                   g * (eval_unchecked(p.inner, w, zt) - g * eval_unchecked(p.inner, w, wt));
          },
      },
      spec.node().v);
}

using Columns = std::span<const std::span<const double>>;

void batch_unchecked(const KernelSpec& spec, std::span<const double> q, Columns cols,
                     std::span<double> out) {
  const std::size_t n = out.size();
  std::visit(
      overloaded{
          [&](const kernel::Gaussian& g) {
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t d = 0; d < q.size(); ++d) simd::add_sqdiff(q[d], cols[d], out);
            simd::gaussian_from_sqdist(out, 1.0 / (2.0 * g.sigma * g.sigma),
                                       gaussian_prefactor(g.sigma, g.dim), out);
          },
          [&](const kernel::Polynomial& p) {
            std::fill(out.begin(), out.end(), p.c);
            for (std::size_t d = 0; d < q.size(); ++d) simd::add_scaled(q[d], cols[d], out);
            if (p.degree != 1) {
              for (double& v : out) v = std::pow(v, p.degree);
            }
          },
          [&](const kernel::Constant&) { std::fill(out.begin(), out.end(), 1.0); },
          [&](const kernel::Weighted& w) {
            batch_unchecked(w.inner, q, cols, out);
            simd::scale(w.tau, out);
          },
          [&](const kernel::Tensor& t) {
            batch_unchecked(t.left, q.first(t.split), cols.first(t.split), out);
            std::vector<double> tmp(n);
            batch_unchecked(t.right, q.subspan(t.split), cols.subspan(t.split), tmp);
            simd::multiply(tmp, out);
          },
          [&](const kernel::Select& s) {
            std::vector<double> sq;
            std::vector<std::span<const double>> sc;
            for (std::size_t i : s.indices) {
              sq.push_back(q[i]);
              sc.push_back(cols[i]);
            }
            batch_unchecked(s.inner, sq, sc, out);
          },
          [&](const kernel::Paired& p) {
            const auto z = q.first(p.half), w = q.subspan(p.half);
            const auto zt = cols.first(p.half), wt = cols.subspan(p.half);
            const double g = p.gamma;
            std::vector<double> t1(n), t2(n), t3(n);
            batch_unchecked(p.inner, z, zt, out);
            batch_unchecked(p.inner, z, wt, t1);
            batch_unchecked(p.inner, w, zt, t2);
            batch_unchecked(p.inner, w, wt, t3);
            // (a - g b) - g (c - g d)
            simd::combine(t2, -g, t3, t2);
            simd::combine(out, -g, t1, out);
            simd::combine(out, -g, t2, out);
          },
      },
      spec.node().v);
}

std::shared_ptr<const KernelSpec::Node> make(auto&& v) {
  return std::make_shared<const KernelSpec::Node>(KernelSpec::Node{std::forward<decltype(v)>(v)});
}

}  // namespace

KernelSpec KernelSpec::gaussian(double sigma, std::size_t dim) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel: sigma must be positive");
  if (dim == 0) throw std::invalid_argument("gaussian kernel: dimension must be positive");
  return KernelSpec(make(kernel::Gaussian{sigma, dim}));
}

KernelSpec KernelSpec::polynomial(double c, int degree) {
  if (!(c >= 0.0)) throw std::invalid_argument("polynomial kernel: c must be nonnegative");
  if (degree < 1) throw std::invalid_argument("polynomial kernel: degree must be positive");
  return KernelSpec(make(kernel::Polynomial{c, degree}));
}

KernelSpec KernelSpec::constant() { return KernelSpec(make(kernel::Constant{})); }

KernelSpec KernelSpec::weighted(double tau, KernelSpec inner) {
  if (!(tau > 0.0)) throw std::invalid_argument("weighted kernel: tau must be positive");
  return KernelSpec(make(kernel::Weighted{tau, std::move(inner)}));
}

KernelSpec KernelSpec::tensor(KernelSpec left, KernelSpec right, std::size_t split) {
  if (auto d = left.input_dim(); d && *d != split) {
    throw std::invalid_argument("tensor kernel: left factor expects " + std::to_string(*d) +
                                " inputs but split is " + std::to_string(split));
  }
  return KernelSpec(make(kernel::Tensor{std::move(left), std::move(right), split}));
}

KernelSpec KernelSpec::select(std::vector<std::size_t> indices, KernelSpec inner) {
  if (auto d = inner.input_dim(); d && *d != indices.size()) {
    throw std::invalid_argument("select kernel: inner kernel expects " + std::to_string(*d) +
                                " inputs but " + std::to_string(indices.size()) + " selected");
  }
  return KernelSpec(make(kernel::Select{std::move(indices), std::move(inner)}));
}

KernelSpec KernelSpec::paired(double gamma, KernelSpec inner, std::size_t half_dim) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("paired kernel: gamma must be in [0,1)");
  if (auto d = inner.input_dim(); d && *d != half_dim) {
    throw std::invalid_argument("paired kernel: inner kernel expects " + std::to_string(*d) +
                                " inputs but half dimension is " + std::to_string(half_dim));
  }
  return KernelSpec(make(kernel::Paired{gamma, std::move(inner), half_dim}));
}

KernelSpec KernelSpec::affine_input() { return weighted(0.25, polynomial(4.0, 1)); }

std::optional<std::size_t> KernelSpec::input_dim() const {
  return std::visit(
      overloaded{
          [](const kernel::Gaussian& g) -> std::optional<std::size_t> { return g.dim; },
          [](const kernel::Polynomial&) -> std::optional<std::size_t> { return std::nullopt; },
          [](const kernel::Constant&) -> std::optional<std::size_t> { return std::nullopt; },
          [](const kernel::Weighted& w) { return w.inner.input_dim(); },
          [](const kernel::Tensor& t) -> std::optional<std::size_t> {
            if (auto r = t.right.input_dim()) return t.split + *r;
            return std::nullopt;
          },
          [](const kernel::Select&) -> std::optional<std::size_t> { return std::nullopt; },
          [](const kernel::Paired& p) -> std::optional<std::size_t> { return 2 * p.half; },
      },
      node_->v);
}

void KernelSpec::check_input(std::size_t n) const {
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument("kernel " + describe() + ": " + what + " (input length " +
                                std::to_string(n) + ")");
  };
  std::visit(overloaded{
                 [&](const kernel::Gaussian& g) {
                   if (n != g.dim) fail("expected dimension " + std::to_string(g.dim));
                 },
                 [&](const kernel::Polynomial&) {},
                 [&](const kernel::Constant&) {},
                 [&](const kernel::Weighted& w) { w.inner.check_input(n); },
                 [&](const kernel::Tensor& t) {
                   if (n < t.split) fail("input shorter than tensor split " + std::to_string(t.split));
                   t.left.check_input(t.split);
                   t.right.check_input(n - t.split);
                 },
                 [&](const kernel::Select& s) {
                   for (std::size_t i : s.indices) {
                     if (i >= n) fail("selected coordinate " + std::to_string(i) + " out of range");
                   }
                   s.inner.check_input(s.indices.size());
                 },
                 [&](const kernel::Paired& p) {
                   if (n != 2 * p.half) fail("expected paired dimension " + std::to_string(2 * p.half));
                   p.inner.check_input(p.half);
                 },
             },
             node_->v);
}

std::string KernelSpec::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const kernel::Gaussian& g) { os << "gaussian(sigma=" << g.sigma << ",L=" << g.dim << ")"; },
                 [&](const kernel::Polynomial& p) { os << "polynomial(c=" << p.c << ",d=" << p.degree << ")"; },
                 [&](const kernel::Constant&) { os << "constant"; },
                 [&](const kernel::Weighted& w) { os << "weighted(" << w.tau << "," << w.inner.describe() << ")"; },
                 [&](const kernel::Tensor& t) {
                   os << "tensor(" << t.left.describe() << "," << t.right.describe() << ",split=" << t.split << ")";
                 },
                 [&](const kernel::Select& s) {
                   os << "select([";
                   for (std::size_t i = 0; i < s.indices.size(); ++i) os << (i ? "," : "") << s.indices[i];
                   os << "]," << s.inner.describe() << ")";
                 },
                 [&](const kernel::Paired& p) {
                   os << "paired(gamma=" << p.gamma << "," << p.inner.describe() << ",half=" << p.half << ")";
                 },
             },
             node_->v);
  return os.str();
}

nlohmann::json KernelSpec::to_json() const {
  using nlohmann::json;
  return std::visit(
      overloaded{
          [](const kernel::Gaussian& g) { return json{{"type", "gaussian"}, {"sigma", g.sigma}, {"dim", g.dim}}; },
          [](const kernel::Polynomial& p) { return json{{"type", "polynomial"}, {"c", p.c}, {"degree", p.degree}}; },
          [](const kernel::Constant&) { return json{{"type", "constant"}}; },
          [](const kernel::Weighted& w) {
            return json{{"type", "weighted"}, {"tau", w.tau}, {"inner", w.inner.to_json()}};
          },
          [](const kernel::Tensor& t) {
            return json{{"type", "tensor"}, {"left", t.left.to_json()}, {"right", t.right.to_json()}, {"split", t.split}};
          },
          [](const kernel::Select& s) {
            return json{{"type", "select"}, {"indices", s.indices}, {"inner", s.inner.to_json()}};
          },
          [](const kernel::Paired& p) {
            return json{{"type", "paired"}, {"gamma", p.gamma}, {"inner", p.inner.to_json()}, {"half", p.half}};
          },
      },
      node_->v);
}

KernelSpec KernelSpec::from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian") return gaussian(j.at("sigma").get<double>(), j.at("dim").get<std::size_t>());
  if (type == "polynomial") return polynomial(j.at("c").get<double>(), j.at("degree").get<int>());
  if (type == "linear") return linear();
  if (type == "constant") return constant();
  if (type == "weighted") return weighted(j.at("tau").get<double>(), from_json(j.at("inner")));
  if (type == "tensor") {
    return tensor(from_json(j.at("left")), from_json(j.at("right")), j.at("split").get<std::size_t>());
  }
  if (type == "select") {
    return select(j.at("indices").get<std::vector<std::size_t>>(), from_json(j.at("inner")));
  }
  if (type == "paired") {
    return paired(j.at("gamma").get<double>(), from_json(j.at("inner")), j.at("half").get<std::size_t>());
  }
  throw std::invalid_argument("unknown kernel type: " + type);
}

double eval_kernel(const KernelSpec& spec, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("kernel " + spec.describe() + ": argument lengths differ (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  spec.check_input(a.size());
  return eval_unchecked(spec, a, b);
}

void eval_batch(const KernelSpec& spec, std::span<const double> query,
                std::span<const std::span<const double>> columns, std::span<double> out) {
  if (query.size() != columns.size()) {
    throw std::invalid_argument("kernel " + spec.describe() + ": query has " + std::to_string(query.size()) +
                                " coordinates but centers have " + std::to_string(columns.size()));
  }
  for (const auto& c : columns) {
    if (c.size() != out.size()) throw std::invalid_argument("eval_batch: column length mismatch");
  }
  spec.check_input(query.size());
  if (out.empty()) return;
  batch_unchecked(spec, query, columns, out);
}

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const std::vector<std::vector<double>>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      g(i, j) = eval_kernel(spec, points[i], points[j]);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

void CenterStore::append(std::span<const double> c) {
  if (c.size() != cols_.size()) {
    throw std::invalid_argument("CenterStore: center has " + std::to_string(c.size()) + " coordinates, expected " +
                                std::to_string(cols_.size()));
  }
  for (std::size_t d = 0; d < c.size(); ++d) cols_[d].push_back(c[d]);
  ++count_;
}

void CenterStore::erase(std::size_t j) {
  if (j >= count_) throw std::out_of_range("CenterStore: index out of range");
  for (auto& col : cols_) col.erase(col.begin() + static_cast<std::ptrdiff_t>(j));
  --count_;
}

std::vector<double> CenterStore::center(std::size_t j) const {
  std::vector<double> c(cols_.size());
  for (std::size_t d = 0; d < cols_.size(); ++d) c[d] = cols_[d][j];
  return c;
}

std::vector<std::span<const double>> CenterStore::columns() const {
  return {cols_.begin(), cols_.end()};
}

}  // namespace certrl
