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

// Acceptance criteria as callable checks. Each returns a pass flag and a
// one-line measurement summary.

#include <functional>
#include <string>
#include <vector>

namespace certrl::acceptance {

struct Result {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  std::string scratch_dir = "acceptance_out";  // experiment artifacts land here
};

Result safety_recovery(const Options& opt);
Result monotone_approximation(const Options& opt);
Result forward_invariance(const Options& opt);
Result gp_route_equivalence(const Options& opt);
Result paired_isometry(const Options& opt);
Result certificate_soundness(const Options& opt);
Result solver_optimality(const Options& opt);
Result structure_extraction(const Options& opt);
Result value_learning(const Options& opt);
Result oracle_micro_suites(const Options& opt);

struct Criterion {
  int id;
  std::string name;
  std::function<Result(const Options&)> run;
};

std::vector<Criterion> criteria();

// Runs the selected criteria (all when `only` is empty), timing each one.
std::vector<Result> run_all(const Options& opt, const std::vector<int>& only = {});

// "[PASS] 3 forward-invariance (1.2 s): detail"
std::string format(const Result& r);

}  // namespace certrl::acceptance
