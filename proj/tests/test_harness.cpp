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

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "certrl/config.hpp"
#include "certrl/harness.hpp"
#include "certrl/metrics.hpp"
#include "doctest.h"

using namespace certrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("certrl_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// One state, constant reward, absorbing.
class ConstantRewardEnv final : public Environment {
 public:
  explicit ConstantRewardEnv(double r) {
    reward_ = {"constant", [r](std::span<const double> x, std::span<const double>) { return x[0] == 0.0 ? 0.0 : r; },
               std::fabs(r)};
    x_ = Eigen::VectorXd::Ones(1);
  }
  std::string name() const override { return "constant"; }
  std::size_t state_dim() const override { return 1; }
  std::size_t input_dim() const override { return 1; }
  InputBox box() const override { return {Eigen::VectorXd::Constant(1, -1.0), Eigen::VectorXd::Constant(1, 1.0)}; }
  const RewardSpec& reward() const override { return reward_; }
  Eigen::VectorXd transition(const Eigen::VectorXd& x, const Eigen::VectorXd&) const override { return x; }
  AffineExtract exact_affine(const Eigen::VectorXd&) const override {
    return {Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)};
  }
  ScheduleEvents apply_schedule(std::size_t, std::mt19937_64&) override { return {}; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<ConstantRewardEnv>(*this); }

 private:
  RewardSpec reward_;
};

StepRecord record(std::size_t n, double pos) {
  StepRecord r;
  r.n = n;
  r.x = Eigen::Vector2d(pos, 0.0);
  r.u = Eigen::VectorXd::Zero(1);
  r.x_next = r.x;
  r.barrier_values = {3.0 - pos, pos + 3.0};
  return r;
}

}  // namespace

TEST_CASE("nmse") {
  const std::vector<double> r{1.0, -2.0, 3.0};
  CHECK(compute_nmse(r, r).value() == 0.0);
  CHECK(compute_nmse(std::vector<double>{0.0, 0.0, 0.0}, r).value() == 1.0);
  // (0.5^2 + 1^2 + 0^2) / (1 + 4 + 9)
  CHECK(compute_nmse(std::vector<double>{1.5, -1.0, 3.0}, r).value() == doctest::Approx(1.25 / 14.0));
  CHECK_FALSE(compute_nmse(std::vector<double>{1.0}, std::vector<double>{0.0}).has_value());
  CHECK_FALSE(compute_nmse(std::vector<double>{}, std::vector<double>{}).has_value());
  CHECK_THROWS(compute_nmse(std::vector<double>{1.0}, r));
}

TEST_CASE("nmse tracker smooths a sliding window") {
  NmseTracker t(2, 2);
  CHECK_FALSE(t.push(1.0, 0.0).has_value());
  // window {(1,0),(0,1)}: 2 / 1
  CHECK(t.push(0.0, 1.0).value() == doctest::Approx(2.0));
  // window {(0,1),(1,1)}: 1 / 2; average with 2
  CHECK(t.push(1.0, 1.0).value() == doctest::Approx(1.25));
  // window {(1,1),(1,1)}: 0; average with 0.5
  CHECK(t.push(1.0, 1.0).value() == doctest::Approx(0.25));
}

TEST_CASE("truncated discounted values") {
  CHECK(truncation_horizon(0.9, 12.0, 1e-6) == 155);
  CHECK(std::pow(0.9, 155) * 12.0 < 1e-6);
  CHECK(std::pow(0.9, 154) * 12.0 >= 1e-6);

  ConstantRewardEnv env(12.0);
  const Controller zero = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
  const auto v = evaluate_policy_value(env, zero, {Eigen::VectorXd::Ones(1)}, 0.9, 200);
  CHECK(std::fabs(v[0] - 120.0) <= 1e-5);
  const auto c = evaluate_policy_value(env, zero, {Eigen::VectorXd::Ones(1)}, 0.5, 7);
  CHECK(c[0] == doctest::Approx(12.0 * (1.0 - std::pow(0.5, 7)) / 0.5));
  const auto absorbing = evaluate_policy_value(env, zero, {Eigen::VectorXd::Zero(1)}, 0.9, 200);
  CHECK(absorbing[0] == 0.0);
}

TEST_CASE("metrics csv") {
  const auto dir = scratch("csv");
  SUBCASE("empty run writes only the header") {
    MetricsTable t{{"n", "x", "nmse"}, {}};
    const auto path = (dir / "empty.csv").string();
    write_metrics(t, path);
    CHECK(slurp(path) == "n,x,nmse\n");
    const auto back = read_metrics(path);
    CHECK(back.header == t.header);
    CHECK(back.rows.empty());
  }
  SUBCASE("values round-trip and blanks stay blank") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-1e6, 1e6);
    MetricsTable t{{"a", "b", "c"}, {}};
    for (int i = 0; i < 200; ++i) {
      std::optional<double> blank;
      if (i % 3) blank = d(rng) * 1e-9;
      t.add_row({d(rng), blank, std::ldexp(d(rng), -40)});
    }
    const auto path = (dir / "values.csv").string();
    write_metrics(t, path);
    const auto back = read_metrics(path);
    REQUIRE(back.rows.size() == t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        REQUIRE(back.rows[r][c].has_value() == t.rows[r][c].has_value());
        if (t.rows[r][c]) CHECK(*back.rows[r][c] == *t.rows[r][c]);
      }
    }
  }
  SUBCASE("rows must match the header width") {
    MetricsTable t{{"a", "b"}, {}};
    CHECK_THROWS(t.add_row({1.0}));
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("replica seeds are distinct and stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 100; ++r) seen.insert(replica_seed(7, r));
  CHECK(seen.size() == 100);
  CHECK(replica_seed(7, 3) == replica_seed(7, 3));
  CHECK(replica_seed(7, 3) != replica_seed(8, 3));
}

TEST_CASE("sectioned key-value text") {
  const auto j = ini_to_json(
      "# comment\n"
      "experiment = quadrotor-rl\n"
      "seed = 3\n"
      "; another comment\n"
      "[value.apfbs]\n"
      "step = 0.1\n"
      "[environment]\n"
      "params = [1, 2, 3]\n"
      "kind = quadrotor\n");
  CHECK(j["experiment"] == "quadrotor-rl");
  CHECK(j["seed"] == 3);
  CHECK(j["value"]["apfbs"]["step"] == 0.1);
  CHECK(j["environment"]["params"].size() == 3);
  CHECK(j["environment"]["kind"] == "quadrotor");
  CHECK_THROWS_AS(ini_to_json("[broken\n"), std::invalid_argument);
  CHECK_THROWS_AS(ini_to_json("novalue\n"), std::invalid_argument);
  CHECK_THROWS_AS(ini_to_json("a = 1\n[a]\n"), std::invalid_argument);
}

TEST_CASE("shipped config files match the built-in presets") {
  const fs::path configs = fs::path(CERTRL_SOURCE_DIR) / "configs";
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto path = configs / (name + ".json");
    REQUIRE(fs::exists(path));
    CHECK(load_config(path.string()).to_json() == preset_config(name).to_json());
  }
  const auto ini = configs / "quadrotor-recovery.ini";
  REQUIRE(fs::exists(ini));
  CHECK(load_config(ini.string()).to_json() == preset_config("quadrotor-recovery").to_json());
  CHECK_THROWS(preset_config("no-such-preset"));
}

TEST_CASE("config validation rejects inconsistencies before running") {
  auto good = preset_config("quadrotor-rl").to_json();
  CHECK_NOTHROW(parse_config(good).validate());

  auto missing_seed = good;
  missing_seed.erase("seed");
  CHECK_THROWS_AS(parse_config(missing_seed), std::invalid_argument);

  auto unknown = good;
  unknown["colour"] = "blue";
  CHECK_THROWS_AS(parse_config(unknown), std::invalid_argument);

  auto bad_step = good;
  bad_step["value"]["apfbs"]["step"] = 2.5;
  CHECK_THROWS_AS(parse_config(bad_step).validate(), std::invalid_argument);

  auto bad_gamma = good;
  bad_gamma["value"]["gamma"] = 1.0;
  CHECK_THROWS_AS(parse_config(bad_gamma).validate(), std::invalid_argument);

  auto bad_barrier = good;
  bad_barrier["barrier"]["preset"] = "moat";
  CHECK_THROWS_AS(parse_config(bad_barrier).validate(), std::invalid_argument);

  auto bad_experiment = good;
  bad_experiment["experiment"] = "flight";
  CHECK_THROWS_AS(parse_config(bad_experiment).validate(), std::invalid_argument);

  auto wrong_type = good;
  wrong_type["steps"] = "many";
  CHECK_THROWS_AS(parse_config(wrong_type), std::invalid_argument);

  // The runner validates before it writes anything.
  const auto dir = scratch("invalid");
  auto cfg = preset_config("quadrotor-rl");
  cfg.value.gamma = 1.0;
  cfg.output_dir = (dir / "out").string();
  CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
  CHECK_FALSE(fs::exists(dir / "out"));
}

TEST_CASE("recovery report") {
  std::vector<StepRecord> recs;
  for (std::size_t n = 0; n < 40; ++n) {
    // Outside the box on steps 12..15, back inside afterwards.
    recs.push_back(record(n, n >= 12 && n <= 15 ? 3.5 : 1.0));
  }
  const auto r = recovery_report(recs, 10, 20, 10);
  REQUIRE(r.first_exit.has_value());
  CHECK(*r.first_exit == 12);
  REQUIRE(r.reentry.has_value());
  CHECK(*r.reentry == 16);
  CHECK(r.reentered_in_time);
  CHECK(r.final_window_safe);
  CHECK(r.final_window_min_barrier == doctest::Approx(2.0));

  const auto late = recovery_report(recs, 10, 20, 3);
  CHECK_FALSE(late.reentered_in_time);
  CHECK_FALSE(late.recovered());

  std::vector<StepRecord> errs;
  for (std::size_t n = 0; n < 10; ++n) {
    auto s = record(n, 0.0);
    s.param_error_before = 5.0 - 0.1 * static_cast<double>(n);
    s.param_error = n == 6 ? 5.0 : 4.9 - 0.1 * static_cast<double>(n);
    s.model_residual = 1.0;
    errs.push_back(s);
  }
  const auto m = recovery_report(errs, 0, 5, 5);
  CHECK(m.monotone_violations == 1);
  CHECK_FALSE(m.recovered());
}

TEST_CASE("experiment replay is byte identical") {
  auto cfg = preset_config("quadrotor-rl");
  cfg.steps = 1500;
  cfg.demo_steps = 200;
  cfg.evaluations = 2;
  cfg.eval_steps = 100;
  cfg.replicas = 1;
  cfg.policy.explore_steps = 1000;
  cfg.policy.update_period = 500;
  cfg.environment["switches"] = nlohmann::json::array();
  cfg.environment["relocations"] = nlohmann::json::array();
  cfg.baselines.gp_sarsa = true;
  cfg.baselines.gp_sarsa2_freeze = 200;
  const auto dir = scratch("replay");
  cfg.output_dir = (dir / "a").string();
  const auto a = run_experiment(cfg);
  cfg.output_dir = (dir / "b").string();
  const auto b = run_experiment(cfg);
  REQUIRE(a.csv_paths.size() == b.csv_paths.size());
  REQUIRE_FALSE(a.csv_paths.empty());
  for (std::size_t i = 0; i < a.csv_paths.size(); ++i) {
    const std::string ca = slurp(a.csv_paths[i]);
    CHECK_FALSE(ca.empty());
    CHECK(ca == slurp(b.csv_paths[i]));
  }
  // One row per step, fixed column count.
  const auto t = read_metrics(a.csv_paths.front());
  CHECK(t.rows.size() >= 1500);
  for (const auto& row : t.rows) REQUIRE(row.size() == t.header.size());

  cfg.seed += 1;
  cfg.output_dir = (dir / "c").string();
  const auto c = run_experiment(cfg);
  CHECK(slurp(c.csv_paths.front()) != slurp(a.csv_paths.front()));
}

TEST_CASE("emitted inputs are certified unless flagged") {
  auto cfg = preset_config("quadrotor-recovery");
  cfg.steps = 3000;
  cfg.baselines.bayes_linear = false;
  const auto dir = scratch("certified");
  cfg.output_dir = dir.string();
  const auto art = run_experiment(cfg);
  const auto t = read_metrics(art.csv_paths.front());
  std::vector<std::size_t> margins;
  std::optional<std::size_t> deadlock, infeasible;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (t.header[c].rfind("margin", 0) == 0) margins.push_back(c);
    if (t.header[c] == "deadlock") deadlock = c;
    if (t.header[c] == "infeasible") infeasible = c;
  }
  REQUIRE_FALSE(margins.empty());
  REQUIRE(deadlock);
  REQUIRE(infeasible);
  std::size_t checked = 0;
  for (const auto& row : t.rows) {
    if (row[*deadlock].value_or(0.0) != 0.0 || row[*infeasible].value_or(0.0) != 0.0) continue;
    for (std::size_t c : margins) {
      if (row[c]) CHECK(*row[c] >= -1e-9);
    }
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("structure probe separates affine and non-affine data") {
  const auto cfg = preset_config("unicycle-structure");
  REQUIRE(cfg.learner.dims.size() == 3);
  const double ratio = nonaffine_probe_ratio(cfg.learner.dims.front(), 1000, replica_seed(cfg.seed, 1), cfg.learner.normalize_inputs);
  CHECK(ratio >= 0.5);
}
