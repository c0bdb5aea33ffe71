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

// Metrics: normalized mean squared error tracking, truncated discounted
// returns, and CSV emission with locale-independent round-trip formatting.

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certrl/envs.hpp"

namespace certrl {

// sum (pred - R)^2 / sum R^2; nullopt when every reward is zero or the window is empty.
std::optional<double> compute_nmse(std::span<const double> predictions, std::span<const double> rewards);

// Sliding-window NMSE followed by a moving average over the last `smooth` defined values.
class NmseTracker {
 public:
  explicit NmseTracker(std::size_t window = 100, std::size_t smooth = 100);
  // Returns the smoothed value after adding (prediction, reward).
  std::optional<double> push(double prediction, double reward);

 private:
  std::size_t window_, smooth_;
  std::deque<double> preds_, rewards_;
  std::deque<double> recent_;
};

// ceil(log(tol / r_max) / log(gamma)), so gamma^H r_max < tol.
std::size_t truncation_horizon(double gamma, double r_max, double tol = 1e-6);

using Controller = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Discounted sum of rewards over `horizon` steps from each start under the controller.
std::vector<double> evaluate_policy_value(const Environment& env, const Controller& controller,
                                          const std::vector<Eigen::VectorXd>& starts, double gamma,
                                          std::size_t horizon);

// Fixed-header CSV table. Missing values are written as empty fields.
struct MetricsTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;

  void add_row(std::vector<std::optional<double>> row);
};

// Shortest representation that round-trips is not required; 17 significant digits are written.
std::string format_double(double v);
void write_metrics(const MetricsTable& table, const std::string& path);
MetricsTable read_metrics(const std::string& path);

}  // namespace certrl
