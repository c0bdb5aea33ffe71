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

// Sparse multikernel adaptive filter: dictionary management, hyperslab
// projections, the l1 proximity operator, and the adaptive proximal
// forward-backward splitting (APFBS) update.
//
// The estimator is psi(z) = sum_m h_m' k_m(z) where block m holds the atoms
// kappa_m(., z~_{m,j}) of kernel m. Coefficients are stored per block so an
// atom keeps its (block, index) address until it is pruned.

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "certrl/kernels.hpp"
#include "json.hpp"

namespace certrl {

struct ApfbsConfig {
  double step = 0.1;      // lambda in (0, 2)
  std::size_t window = 5; // s
  double l1 = 0.01;       // mu
  double slab = 0.2;      // epsilon_1, hyperslab half-width
  double novelty = 0.1;   // epsilon_2, large-normalized-error threshold

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

class Dictionary {
 public:
  struct Block {
    KernelSpec kernel;
    CenterStore centers;
    int tag = 0;  // caller-defined label (structural block kind)
  };

  Dictionary() = default;
  explicit Dictionary(std::size_t max_size) : max_size_(max_size) {}

  // Registers kernel m with centers of length center_dim.
  std::size_t add_kernel(KernelSpec kernel, std::size_t center_dim, int tag = 0);

  std::size_t num_kernels() const { return blocks_.size(); }
  std::size_t total_size() const;
  std::size_t max_size() const { return max_size_; }
  void set_max_size(std::size_t r) { max_size_ = r; }
  std::size_t center_dim() const;

  const Block& block(std::size_t m) const { return blocks_.at(m); }
  Block& block(std::size_t m) { return blocks_.at(m); }
  const std::vector<Block>& blocks() const { return blocks_; }

 private:
  std::vector<Block> blocks_;
  std::size_t max_size_ = 0;
};

struct FilterState {
  Dictionary dict;
  std::vector<std::vector<double>> h;  // h[m] aligned with dict.block(m) atoms

  FilterState() = default;
  explicit FilterState(Dictionary d);

  std::size_t size() const { return dict.total_size(); }
  // Appends one atom to block m with the given coefficient.
  void append_atom(std::size_t m, std::span<const double> center, double coef = 0.0);

  std::vector<double> flat_coefficients() const;
  void set_flat_coefficients(std::span<const double> flat);
  // Stacked kernel vector k(z) in block-major order, aligned with flat_coefficients().
  std::vector<double> kernel_vector(std::span<const double> z) const;
  // Kernel vector of a single block.
  std::vector<double> block_kernel_vector(std::size_t m, std::span<const double> z) const;

  nlohmann::json to_json() const;
  static FilterState from_json(const nlohmann::json& j);
};

// Last s input-output pairs, oldest first.
class TransitionWindow {
 public:
  struct Pair {
    std::vector<double> z;
    double target;
  };

  explicit TransitionWindow(std::size_t capacity) : capacity_(capacity) {}

  void push(std::vector<double> z, double target);
  std::size_t size() const { return pairs_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return pairs_.empty(); }
  const std::deque<Pair>& pairs() const { return pairs_; }
  void clear() { pairs_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<Pair> pairs_;
};

// h' k(z); 0 for an empty dictionary. Throws on dimension mismatch.
double predict(const FilterState& state, std::span<const double> z);

// Euclidean projection of h onto {x : |x'k - target| <= eps}.
std::vector<double> project_hyperslab(std::span<const double> h, std::span<const double> k,
                                      double target, double eps);

// Componentwise sgn(h) max(|h| - t, 0).
std::vector<double> soft_threshold(std::span<const double> h, double t);

// h <- prox_{lambda mu}[(1 - lambda) I + (lambda / s') sum P_C](h) with s' the window occupancy.
FilterState apfbs_update(FilterState state, const TransitionWindow& window, const ApfbsConfig& config);

// Appends {kappa_m(., z)}_m with zero coefficients iff r + M <= r_max and
// |target - psi(z)|^2 > eps2 |psi(z)|^2.
FilterState admit_or_skip(FilterState state, std::span<const double> z, double target,
                          const ApfbsConfig& config);

// Removes atoms with |h_j| <= tol.
FilterState prune_zero_atoms(FilterState state, double tol = 0.0);

// One online step: push (z, target) into the window, admit, update, prune.
// Returns whether atoms were admitted.
bool adapt(FilterState& state, TransitionWindow& window, std::span<const double> z, double target,
           const ApfbsConfig& config);

}  // namespace certrl
