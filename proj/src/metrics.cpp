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

#include "certrl/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace certrl {

std::optional<double> compute_nmse(std::span<const double> predictions, std::span<const double> rewards) {
  if (predictions.size() != rewards.size()) throw std::invalid_argument("nmse: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const double e = predictions[i] - rewards[i];
    num += e * e;
    den += rewards[i] * rewards[i];
  }
  if (den == 0.0) return std::nullopt;
  return num / den;
}

NmseTracker::NmseTracker(std::size_t window, std::size_t smooth) : window_(window), smooth_(smooth) {
  if (window == 0 || smooth == 0) throw std::invalid_argument("nmse tracker: window sizes must be positive");
}

std::optional<double> NmseTracker::push(double prediction, double reward) {
  preds_.push_back(prediction);
  rewards_.push_back(reward);
  if (preds_.size() > window_) {
    preds_.pop_front();
    rewards_.pop_front();
  }
  const std::vector<double> p(preds_.begin(), preds_.end()), r(rewards_.begin(), rewards_.end());
  const auto v = compute_nmse(p, r);
  if (!v) return std::nullopt;
  recent_.push_back(*v);
  if (recent_.size() > smooth_) recent_.pop_front();
  double s = 0.0;
  for (double x : recent_) s += x;
  return s / static_cast<double>(recent_.size());
}

std::size_t truncation_horizon(double gamma, double r_max, double tol) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("horizon: gamma must lie in (0, 1)");
  if (!(r_max > 0.0 && tol > 0.0)) throw std::invalid_argument("horizon: r_max and tol must be positive");
  if (r_max < tol) return 0;
  return static_cast<std::size_t>(std::ceil(std::log(tol / r_max) / std::log(gamma)));
}

std::vector<double> evaluate_policy_value(const Environment& env, const Controller& controller,
                                          const std::vector<Eigen::VectorXd>& starts, double gamma,
                                          std::size_t horizon) {
  std::vector<double> out;
  out.reserve(starts.size());
  for (const auto& s : starts) {
    Eigen::VectorXd x = s;
    double v = 0.0, disc = 1.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      const Eigen::VectorXd u = controller(x);
      v += disc * env.reward().eval({x.data(), static_cast<std::size_t>(x.size())},
                                    {u.data(), static_cast<std::size_t>(u.size())});
      disc *= gamma;
      x = env.transition(x, u);
    }
    out.push_back(v);
  }
  return out;
}

void MetricsTable::add_row(std::vector<std::optional<double>> row) {
  if (row.size() != header.size()) {
    throw std::invalid_argument("metrics: row has " + std::to_string(row.size()) + " fields, header has " +
                                std::to_string(header.size()));
  }
  rows.push_back(std::move(row));
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  if (res.ec != std::errc()) throw std::runtime_error("metrics: number formatting failed");
  return std::string(buf, res.ptr);
}

void write_metrics(const MetricsTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("metrics: cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      if (row[i] && !std::isnan(*row[i])) out << format_double(*row[i]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("metrics: write to '" + path + "' failed");
}

MetricsTable read_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("metrics: cannot open '" + path + "'");
  MetricsTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics: '" + path + "' has no header");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::optional<double>> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      const std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      if (cell.empty()) {
        row.emplace_back(std::nullopt);
      } else {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (res.ec != std::errc()) throw std::runtime_error("metrics: bad number '" + cell + "' in '" + path + "'");
        row.emplace_back(v);
      }
      if (end == std::string::npos) break;
      start = end + 1;
    }
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace certrl
