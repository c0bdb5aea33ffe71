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

#include "certrl/adafilter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "certrl/simd.hpp"

namespace certrl {

void ApfbsConfig::validate() const {
  if (!(step > 0.0 && step < 2.0)) throw std::invalid_argument("apfbs: step size must lie in (0, 2)");
  if (window == 0) throw std::invalid_argument("apfbs: window length must be positive");
  if (!(l1 >= 0.0)) throw std::invalid_argument("apfbs: l1 weight must be nonnegative");
  if (!(slab >= 0.0)) throw std::invalid_argument("apfbs: hyperslab half-width must be nonnegative");
  if (!(novelty >= 0.0)) throw std::invalid_argument("apfbs: novelty threshold must be nonnegative");
}

std::size_t Dictionary::add_kernel(KernelSpec kernel, std::size_t center_dim, int tag) {
  kernel.check_input(center_dim);
  if (!blocks_.empty() && blocks_.front().centers.dim() != center_dim) {
    throw std::invalid_argument("dictionary: all kernels must share the center dimension");
  }
  blocks_.push_back(Block{std::move(kernel), CenterStore(center_dim), tag});
  return blocks_.size() - 1;
}

std::size_t Dictionary::total_size() const {
  std::size_t r = 0;
  for (const auto& b : blocks_) r += b.centers.size();
  return r;
}

std::size_t Dictionary::center_dim() const { return blocks_.empty() ? 0 : blocks_.front().centers.dim(); }

FilterState::FilterState(Dictionary d) : dict(std::move(d)) {
  h.resize(dict.num_kernels());
  for (std::size_t m = 0; m < h.size(); ++m) h[m].assign(dict.block(m).centers.size(), 0.0);
}

void FilterState::append_atom(std::size_t m, std::span<const double> center, double coef) {
  dict.block(m).centers.append(center);
  h.at(m).push_back(coef);
}

std::vector<double> FilterState::flat_coefficients() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (const auto& hm : h) flat.insert(flat.end(), hm.begin(), hm.end());
  return flat;
}

void FilterState::set_flat_coefficients(std::span<const double> flat) {
  if (flat.size() != size()) throw std::invalid_argument("filter: coefficient length mismatch");
  std::size_t off = 0;
  for (auto& hm : h) {
    std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
              flat.begin() + static_cast<std::ptrdiff_t>(off + hm.size()), hm.begin());
    off += hm.size();
  }
}

std::vector<double> FilterState::block_kernel_vector(std::size_t m, std::span<const double> z) const {
  const auto& b = dict.block(m);
  std::vector<double> k(b.centers.size());
  const auto cols = b.centers.columns();
  eval_batch(b.kernel, z, cols, k);
  return k;
}

std::vector<double> FilterState::kernel_vector(std::span<const double> z) const {
  if (dict.num_kernels() > 0 && z.size() != dict.center_dim()) {
    throw std::invalid_argument("filter: input has " + std::to_string(z.size()) + " coordinates, expected " +
                                std::to_string(dict.center_dim()));
  }
  std::vector<double> k;
  k.reserve(size());
  for (std::size_t m = 0; m < dict.num_kernels(); ++m) {
    const auto km = block_kernel_vector(m, z);
    k.insert(k.end(), km.begin(), km.end());
  }
  return k;
}

nlohmann::json FilterState::to_json() const {
  nlohmann::json blocks = nlohmann::json::array();
  for (std::size_t m = 0; m < dict.num_kernels(); ++m) {
    const auto& b = dict.block(m);
    nlohmann::json centers = nlohmann::json::array();
    for (std::size_t j = 0; j < b.centers.size(); ++j) centers.push_back(b.centers.center(j));
    blocks.push_back({{"kernel", b.kernel.to_json()},
                      {"tag", b.tag},
                      {"center_dim", b.centers.dim()},
                      {"centers", centers},
                      {"h", h[m]}});
  }
  return {{"max_size", dict.max_size()}, {"blocks", blocks}};
}

FilterState FilterState::from_json(const nlohmann::json& j) {
  Dictionary d(j.at("max_size").get<std::size_t>());
  for (const auto& b : j.at("blocks")) {
    d.add_kernel(KernelSpec::from_json(b.at("kernel")), b.at("center_dim").get<std::size_t>(),
                 b.at("tag").get<int>());
  }
  FilterState s(std::move(d));
  std::size_t m = 0;
  for (const auto& b : j.at("blocks")) {
    const auto coefs = b.at("h").get<std::vector<double>>();
    const auto& centers = b.at("centers");
    if (coefs.size() != centers.size()) throw std::invalid_argument("filter checkpoint: coefficient count mismatch");
    for (std::size_t i = 0; i < coefs.size(); ++i) {
      s.append_atom(m, centers[i].get<std::vector<double>>(), coefs[i]);
    }
    ++m;
  }
  return s;
}

void TransitionWindow::push(std::vector<double> z, double target) {
  pairs_.push_back(Pair{std::move(z), target});
  while (pairs_.size() > capacity_) pairs_.pop_front();
}

double predict(const FilterState& state, std::span<const double> z) {
  if (state.dict.num_kernels() > 0 && z.size() != state.dict.center_dim()) {
    throw std::invalid_argument("predict: input has " + std::to_string(z.size()) + " coordinates, expected " +
                                std::to_string(state.dict.center_dim()));
  }
  double y = 0.0;
  for (std::size_t m = 0; m < state.dict.num_kernels(); ++m) {
    if (state.h[m].empty()) continue;
    y += simd::dot(state.h[m], state.block_kernel_vector(m, z));
  }
  return y;
}

namespace {

// Signed distance past the nearer slab boundary, 0 inside.
double slab_excess(double err, double eps) {
  if (err > eps) return err - eps;
  if (err < -eps) return err + eps;
  return 0.0;
}

}  // namespace

std::vector<double> project_hyperslab(std::span<const double> h, std::span<const double> k, double target,
                                      double eps) {
  if (h.size() != k.size()) throw std::invalid_argument("project_hyperslab: length mismatch");
  std::vector<double> out(h.begin(), h.end());
  const double kk = simd::dot(k, k);
  if (kk == 0.0) return out;
  const double excess = slab_excess(simd::dot(h, k) - target, eps);
  if (excess != 0.0) simd::axpy(-excess / kk, k, out);
  return out;
}

std::vector<double> soft_threshold(std::span<const double> h, double t) {
  std::vector<double> out(h.begin(), h.end());
  if (t > 0.0) simd::soft_threshold(out, t);
  return out;
}

FilterState apfbs_update(FilterState state, const TransitionWindow& window, const ApfbsConfig& config) {
  if (window.empty() || state.size() == 0) return state;
  std::vector<double> h = state.flat_coefficients();
  std::vector<double> shift(h.size(), 0.0);
  for (const auto& p : window.pairs()) {
    const auto k = state.kernel_vector(p.z);
    const double kk = simd::dot(k, k);
    if (kk == 0.0) continue;
    const double excess = slab_excess(simd::dot(h, k) - p.target, config.slab);
    if (excess != 0.0) simd::axpy(excess / kk, k, shift);
  }
  simd::axpy(-config.step / static_cast<double>(window.size()), shift, h);
  if (config.l1 > 0.0) simd::soft_threshold(h, config.step * config.l1);
  state.set_flat_coefficients(h);
  return state;
}

FilterState admit_or_skip(FilterState state, std::span<const double> z, double target, const ApfbsConfig& config) {
  const std::size_t m_count = state.dict.num_kernels();
  if (m_count == 0 || state.size() + m_count > state.dict.max_size()) return state;
  const double est = predict(state, z);
  const double err = target - est;
  if (!(err * err > config.novelty * est * est)) return state;
  for (std::size_t m = 0; m < m_count; ++m) state.append_atom(m, z, 0.0);
  return state;
}

FilterState prune_zero_atoms(FilterState state, double tol) {
  for (std::size_t m = 0; m < state.dict.num_kernels(); ++m) {
    auto& hm = state.h[m];
    auto& centers = state.dict.block(m).centers;
    for (std::size_t j = hm.size(); j-- > 0;) {
      if (std::fabs(hm[j]) <= tol) {
        hm.erase(hm.begin() + static_cast<std::ptrdiff_t>(j));
        centers.erase(j);
      }
    }
  }
  return state;
}

bool adapt(FilterState& state, TransitionWindow& window, std::span<const double> z, double target,
           const ApfbsConfig& config) {
  window.push(std::vector<double>(z.begin(), z.end()), target);
  const std::size_t before = state.size();
  state = admit_or_skip(std::move(state), z, target, config);
  const bool admitted = state.size() > before;
  state = apfbs_update(std::move(state), window, config);
  state = prune_zero_atoms(std::move(state), 0.0);
  return admitted;
}

}  // namespace certrl
