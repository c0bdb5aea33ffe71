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

// Experiment runner: builds environments, learners and value models from an
// ExperimentConfig, runs the named experiment, and writes per-run CSVs plus a
// JSON summary.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "certrl/algorithm1.hpp"
#include "certrl/config.hpp"
#include "certrl/metrics.hpp"
#include "json.hpp"

namespace certrl {

struct RunArtifacts {
  std::vector<std::string> csv_paths;
  std::string summary_path;
  nlohmann::json summary;
};

// Validates, runs to completion and writes artifacts under config.output_dir.
RunArtifacts run_experiment(const ExperimentConfig& config);

// Independent stream for replica r of a master seed (splitmix64 over a counter).
std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica);

// Builders shared by the runner and the acceptance checks.
std::unique_ptr<DynamicsLearner> make_learner(const ModelLearnerConfig& config, const Environment& env);
StructuredModel make_structured_model(const std::vector<StructuredDimConfig>& dims, std::size_t n_x, std::size_t n_u);
std::optional<QModel> make_qmodel(const ValueConfig& config, const Environment& env);
std::vector<BarrierSpec> make_barriers(const ExperimentConfig& config);

// One CSV row per step with columns fixed by the environment, barriers and extra series.
MetricsTable step_table(const std::vector<StepRecord>& records, const Environment& env,
                        const std::vector<BarrierSpec>& barriers, const std::vector<std::string>& extra_names = {},
                        const std::vector<std::vector<std::optional<double>>>& extra = {});

struct RecoveryReport {
  std::size_t switch_step = 0;
  std::optional<std::size_t> recovery_step;  // first n > switch with B >= 0 from then on
  std::optional<std::size_t> first_exit;     // first n >= switch with B < 0
  std::optional<std::size_t> reentry;        // first n after first_exit with B >= 0
  bool reentered_in_time = false;            // no exit, or reentry within the allowed delay
  double final_window_min_barrier = 0.0;
  bool final_window_safe = false;
  std::size_t monotone_checks = 0;
  std::size_t monotone_violations = 0;
  double worst_increase = 0.0;
  std::optional<double> final_param_error;

  bool recovered() const { return reentered_in_time && final_window_safe && monotone_violations == 0; }
  nlohmann::json to_json() const;
};

// Safety and monotonicity summary of a run with a parameter switch at switch_step.
RecoveryReport recovery_report(const std::vector<StepRecord>& records, std::size_t switch_step,
                               std::size_t final_window = 5000, std::size_t reentry_limit = 500,
                               double monotone_slack = 1e-12);

// Sparsity ratio of a scalar structured model after `updates` updates on delta = sin(x u), x and u
// uniform on [-2, 2]; with `normalize_inputs` the model sees u / 2.
double nonaffine_probe_ratio(const StructuredDimConfig& dim, std::size_t updates, std::uint64_t seed,
                             bool normalize_inputs = false);

}  // namespace certrl
