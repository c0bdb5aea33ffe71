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

// Positive-definite kernels used by every learner.
//
// KernelSpec is an immutable expression tree. Leaves are Gaussian,
// polynomial and constant kernels; interior nodes weight, tensor, restrict to
// a coordinate subset, or pair (the discounted difference kernel over [z; w]
// inputs used for action-value learning). Copies share the tree.

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace certrl {

class KernelSpec;

namespace kernel {
struct Gaussian {
  double sigma;
  std::size_t dim;
};
struct Polynomial {
  double c;
  int degree;
};
struct Constant {};
struct Weighted;
struct Tensor;
struct Select;
struct Paired;
}  // namespace kernel

class KernelSpec {
 public:
  struct Node;

  // (2 pi sigma^2)^{-dim/2} exp(-|a-b|^2 / (2 sigma^2))
  static KernelSpec gaussian(double sigma, std::size_t dim);
  // (a'b + c)^degree
  static KernelSpec polynomial(double c, int degree);
  static KernelSpec linear() { return polynomial(0.0, 1); }
  static KernelSpec constant();
  static KernelSpec weighted(double tau, KernelSpec inner);
  // left(a[0:split], b[0:split]) * right(a[split:], b[split:])
  static KernelSpec tensor(KernelSpec left, KernelSpec right, std::size_t split);
  // inner evaluated on the listed coordinates only.
  static KernelSpec select(std::vector<std::size_t> indices, KernelSpec inner);
  // k([z;w],[zt;wt]) = (q(z,zt) - g q(z,wt)) - g (q(w,zt) - g q(w,wt)), halves of length half_dim.
  static KernelSpec paired(double gamma, KernelSpec inner, std::size_t half_dim);
  // 1 + u'v / 4, the affine-in-input factor for action values.
  static KernelSpec affine_input();

  const Node& node() const { return *node_; }

  // Exact input dimension when the tree pins one, otherwise nullopt.
  std::optional<std::size_t> input_dim() const;
  // Throws std::invalid_argument if an input of length n cannot be evaluated.
  void check_input(std::size_t n) const;

  std::string describe() const;
  nlohmann::json to_json() const;
  static KernelSpec from_json(const nlohmann::json& j);

 private:
  explicit KernelSpec(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

namespace kernel {
struct Weighted {
  double tau;
  KernelSpec inner;
};
struct Tensor {
  KernelSpec left;
  KernelSpec right;
  std::size_t split;
};
struct Select {
  std::vector<std::size_t> indices;
  KernelSpec inner;
};
struct Paired {
  double gamma;
  KernelSpec inner;
  std::size_t half;
};
}  // namespace kernel

struct KernelSpec::Node {
  std::variant<kernel::Gaussian, kernel::Polynomial, kernel::Constant, kernel::Weighted,
               kernel::Tensor, kernel::Select, kernel::Paired>
      v;
};

double eval_kernel(const KernelSpec& spec, std::span<const double> a, std::span<const double> b);

// Kernel values between one query and many centers stored column-wise:
// columns[d][j] is coordinate d of center j; out[j] = k(query, center_j).
// Uses the active SIMD backend. Dimensions are validated.
void eval_batch(const KernelSpec& spec, std::span<const double> query,
                std::span<const std::span<const double>> columns, std::span<double> out);

Eigen::MatrixXd gram_matrix(const KernelSpec& spec, const std::vector<std::vector<double>>& points);

// Column-major (structure-of-arrays) storage of kernel centers.
class CenterStore {
 public:
  CenterStore() = default;
  explicit CenterStore(std::size_t dim) : cols_(dim) {}

  std::size_t dim() const { return cols_.size(); }
  std::size_t size() const { return count_; }
  void append(std::span<const double> c);
  void erase(std::size_t j);
  std::vector<double> center(std::size_t j) const;
  std::vector<std::span<const double>> columns() const;

 private:
  std::vector<std::vector<double>> cols_;
  std::size_t count_ = 0;
};

}  // namespace certrl
