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

// Experiment configuration: typed view over a JSON document, loadable from
// JSON or from sectioned key-value text, validated before any simulation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "certrl/adafilter.hpp"
#include "certrl/algorithm1.hpp"
#include "json.hpp"

namespace certrl {

// Kernel set for one output dimension of the structured learner.
struct StructuredDimConfig {
  ApfbsConfig apfbs;
  std::size_t r_max = 500;
  std::string kernels = "gaussian";  // "gaussian" ladder or "constant"
  std::vector<double> sigmas;
  std::vector<std::size_t> state_inputs;  // coordinates of x seen by the kernels; empty means all
  double tau = 0.1;
};

struct ModelLearnerConfig {
  std::string kind = "parametric";  // parametric | bayes_linear | structured | exact
  double step = 0.6;
  std::vector<double> h0;  // empty: zeros
  double prior_variance = 25.0;
  double noise_variance = 0.01;
  std::vector<StructuredDimConfig> dims;
  bool normalize_inputs = false;  // structured: feed u / max(|lo|, |hi|) per input coordinate
};

struct ValueConfig {
  bool enabled = false;
  ApfbsConfig apfbs;
  std::size_t r_max = 600;
  std::vector<double> sigmas;
  double gamma = 0.9;
  bool normalize_inputs = false;  // value model sees the input box mapped onto [-1, 1]
};

struct BaselineConfig {
  bool bayes_linear = false;
  bool gp_sarsa = false;
  std::optional<std::size_t> gp_sarsa2_freeze;
  double gp_sigma = 3.0;
  double gp_noise = 1e-6;
  std::size_t gp_window = 600;
  std::size_t gp_refit_every = 100;
};

struct ExperimentConfig {
  std::string experiment;  // quadrotor-recovery | quadrotor-rl | unicycle-structure | oracle-equivalence
  std::uint64_t seed = 0;
  std::size_t replicas = 1;
  std::size_t evaluations = 5;
  std::size_t steps = 10000;       // learning steps per replica
  std::size_t demo_steps = 0;      // greedy steps after learning with learning frozen
  std::size_t eval_steps = 1000;   // rollout length per evaluation
  std::string output_dir = "out";
  nlohmann::json environment = nlohmann::json::object();
  std::string barrier_preset;
  nlohmann::json barrier_params = nlohmann::json::object();
  ModelLearnerConfig learner;
  ValueConfig value;
  PolicyConfig policy;
  DeadlockConfig deadlock;
  double lyapunov_c = 1.0;
  BaselineConfig baselines;
  nlohmann::json extra = nlohmann::json::object();  // experiment-specific knobs

  // Throws std::invalid_argument with a descriptive message on any inconsistency.
  void validate() const;
  nlohmann::json to_json() const;
};

// Field-by-field parse; unknown top-level keys are rejected.
ExperimentConfig parse_config(const nlohmann::json& j);

// Sectioned key-value text to JSON. "[a.b]" opens nested object a.b; values parse as JSON
// when possible and fall back to strings; '#' and ';' start comments.
nlohmann::json ini_to_json(const std::string& text);

// Reads JSON when the content starts with '{', sectioned text otherwise.
ExperimentConfig load_config(const std::string& path);

// Built-in configurations matching the shipped preset files.
std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

}  // namespace certrl
