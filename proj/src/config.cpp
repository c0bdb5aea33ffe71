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

#include "certrl/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "certrl/barrier.hpp"
#include "certrl/envs.hpp"

namespace certrl {

using nlohmann::json;

namespace {

[[noreturn]] void reject(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) reject(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) reject("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    reject(where + "." + key + ": " + e.what());
  }
}

ApfbsConfig parse_apfbs(const json& j, const std::string& where) {
  check_keys(j, {"step", "window", "l1", "slab", "novelty"}, where);
  ApfbsConfig c;
  read(j, "step", c.step, where);
  read(j, "window", c.window, where);
  read(j, "l1", c.l1, where);
  read(j, "slab", c.slab, where);
  read(j, "novelty", c.novelty, where);
  return c;
}

json apfbs_json(const ApfbsConfig& c) {
  return {{"step", c.step}, {"window", c.window}, {"l1", c.l1}, {"slab", c.slab}, {"novelty", c.novelty}};
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"experiment", "seed", "replicas", "evaluations", "steps", "demo_steps", "eval_steps", "output_dir",
                 "environment", "barrier", "learner", "value", "policy", "deadlock", "lyapunov_c", "baselines", "extra"},
             "top level");
  ExperimentConfig c;
  if (!j.contains("experiment")) reject("missing 'experiment'");
  if (!j.contains("seed")) reject("missing 'seed' (wall-clock seeding is not supported)");
  read(j, "experiment", c.experiment, "top");
  read(j, "seed", c.seed, "top");
  read(j, "replicas", c.replicas, "top");
  read(j, "evaluations", c.evaluations, "top");
  read(j, "steps", c.steps, "top");
  read(j, "demo_steps", c.demo_steps, "top");
  read(j, "eval_steps", c.eval_steps, "top");
  read(j, "output_dir", c.output_dir, "top");
  read(j, "lyapunov_c", c.lyapunov_c, "top");
  if (j.contains("environment")) c.environment = j.at("environment");
  if (j.contains("extra")) c.extra = j.at("extra");

  if (j.contains("barrier")) {
    json b = j.at("barrier");
    if (!b.is_object() || !b.contains("preset")) reject("barrier needs a 'preset'");
    c.barrier_preset = b.at("preset").get<std::string>();
    b.erase("preset");
    c.barrier_params = b;
  }

  if (j.contains("learner")) {
    const json& l = j.at("learner");
    check_keys(l, {"kind", "step", "h0", "prior_variance", "noise_variance", "dims", "normalize_inputs"}, "learner");
    read(l, "kind", c.learner.kind, "learner");
    read(l, "step", c.learner.step, "learner");
    read(l, "h0", c.learner.h0, "learner");
    read(l, "prior_variance", c.learner.prior_variance, "learner");
    read(l, "noise_variance", c.learner.noise_variance, "learner");
    read(l, "normalize_inputs", c.learner.normalize_inputs, "learner");
    if (l.contains("dims")) {
      for (const auto& d : l.at("dims")) {
        const std::string where = "learner.dims[" + std::to_string(c.learner.dims.size()) + "]";
        check_keys(d, {"apfbs", "r_max", "kernels", "sigmas", "state_inputs", "tau"}, where);
        StructuredDimConfig sd;
        if (d.contains("apfbs")) sd.apfbs = parse_apfbs(d.at("apfbs"), where + ".apfbs");
        read(d, "r_max", sd.r_max, where);
        read(d, "kernels", sd.kernels, where);
        read(d, "sigmas", sd.sigmas, where);
        read(d, "state_inputs", sd.state_inputs, where);
        read(d, "tau", sd.tau, where);
        c.learner.dims.push_back(std::move(sd));
      }
    }
  }

  if (j.contains("value")) {
    const json& v = j.at("value");
    check_keys(v, {"enabled", "apfbs", "r_max", "sigmas", "gamma", "normalize_inputs"}, "value");
    c.value.enabled = v.value("enabled", true);
    if (v.contains("apfbs")) c.value.apfbs = parse_apfbs(v.at("apfbs"), "value.apfbs");
    read(v, "r_max", c.value.r_max, "value");
    read(v, "sigmas", c.value.sigmas, "value");
    read(v, "gamma", c.value.gamma, "value");
    read(v, "normalize_inputs", c.value.normalize_inputs, "value");
  }

  if (j.contains("policy")) {
    const json& p = j.at("policy");
    check_keys(p, {"update_period", "explore_steps"}, "policy");
    read(p, "update_period", c.policy.update_period, "policy");
    read(p, "explore_steps", c.policy.explore_steps, "policy");
  }

  if (j.contains("deadlock")) {
    const json& d = j.at("deadlock");
    check_keys(d, {"enabled", "window", "threshold"}, "deadlock");
    read(d, "enabled", c.deadlock.enabled, "deadlock");
    read(d, "window", c.deadlock.window, "deadlock");
    read(d, "threshold", c.deadlock.threshold, "deadlock");
  }

  if (j.contains("baselines")) {
    const json& b = j.at("baselines");
    check_keys(b, {"bayes_linear", "gp_sarsa", "gp_sarsa2_freeze", "gp_sigma", "gp_noise", "gp_window", "gp_refit_every"},
               "baselines");
    read(b, "bayes_linear", c.baselines.bayes_linear, "baselines");
    read(b, "gp_sarsa", c.baselines.gp_sarsa, "baselines");
    if (b.contains("gp_sarsa2_freeze") && !b.at("gp_sarsa2_freeze").is_null()) {
      c.baselines.gp_sarsa2_freeze = b.at("gp_sarsa2_freeze").get<std::size_t>();
    }
    read(b, "gp_sigma", c.baselines.gp_sigma, "baselines");
    read(b, "gp_noise", c.baselines.gp_noise, "baselines");
    read(b, "gp_window", c.baselines.gp_window, "baselines");
    read(b, "gp_refit_every", c.baselines.gp_refit_every, "baselines");
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> kinds = {"quadrotor-recovery", "quadrotor-rl", "unicycle-structure",
                                              "oracle-equivalence"};
  if (!kinds.count(experiment)) reject("unknown experiment '" + experiment + "'");
  if (replicas == 0) reject("replicas must be at least 1");
  if (output_dir.empty()) reject("output_dir must not be empty");
  if (experiment == "oracle-equivalence") return;

  if (steps == 0) reject("steps must be positive");
  policy.validate();
  if (deadlock.window == 0) reject("deadlock.window must be positive");
  if (lyapunov_c < 0.0) reject("lyapunov_c must be nonnegative");

  // Building the environment and barriers here surfaces unknown presets and bad parameters.
  const auto env = make_environment(environment);
  if (barrier_preset.empty()) reject("barrier preset missing");
  for (const auto& b : certrl::barrier_preset(barrier_preset, barrier_params)) {
    if (b.state_dim != env->state_dim()) reject("barrier preset '" + barrier_preset + "' does not match the environment");
  }

  static const std::set<std::string> learners = {"parametric", "bayes_linear", "structured", "exact"};
  if (!learners.count(learner.kind)) reject("unknown learner kind '" + learner.kind + "'");
  if (learner.kind == "parametric" || learner.kind == "bayes_linear" || baselines.bayes_linear) {
    if (env->name() != "quadrotor") reject("parametric learners need the quadrotor environment");
    if (!learner.h0.empty() && learner.h0.size() != 3) reject("learner.h0 must have 3 entries");
  }
  if (learner.kind == "parametric" && !(learner.step > 0.0 && learner.step < 2.0)) {
    reject("learner.step must lie in (0, 2)");
  }
  if (learner.prior_variance <= 0.0 || learner.noise_variance <= 0.0) reject("learner variances must be positive");
  if (learner.kind == "structured") {
    if (learner.dims.size() != env->state_dim()) reject("learner.dims needs one entry per state dimension");
    for (const auto& d : learner.dims) {
      d.apfbs.validate();
      if (d.kernels == "gaussian") {
        if (d.sigmas.empty()) reject("gaussian kernel set needs sigmas");
        for (double s : d.sigmas) {
          if (!(s > 0.0)) reject("sigmas must be positive");
        }
      } else if (d.kernels != "constant") {
        reject("unknown kernel set '" + d.kernels + "'");
      }
      for (auto i : d.state_inputs) {
        if (i >= env->state_dim()) reject("state_inputs index out of range");
      }
      if (!(d.tau > 0.0)) reject("tau must be positive");
    }
  }
  const InputBox box = env->box();
  if (learner.normalize_inputs && !(box.lo.cwiseAbs().cwiseMax(box.hi.cwiseAbs()).array() > 0.0).all()) {
    reject("learner.normalize_inputs needs a nonzero input box");
  }
  if (value.normalize_inputs && !((box.hi - box.lo).minCoeff() > 0.0)) {
    reject("value.normalize_inputs needs an input box with positive width");
  }

  if (value.enabled) {
    value.apfbs.validate();
    if (value.sigmas.empty()) reject("value.sigmas must not be empty");
    if (!(value.gamma > 0.0 && value.gamma < 1.0)) reject("value.gamma must lie in (0, 1)");
    if (value.r_max == 0) reject("value.r_max must be positive");
  }
  if (experiment == "quadrotor-rl" && !value.enabled) reject("quadrotor-rl needs value learning enabled");
  if ((baselines.gp_sarsa || baselines.gp_sarsa2_freeze) && !value.enabled) {
    reject("GP SARSA baselines run alongside value learning");
  }
  if (baselines.gp_sigma <= 0.0 || baselines.gp_noise <= 0.0 || baselines.gp_window == 0 ||
      baselines.gp_refit_every == 0) {
    reject("GP baseline parameters must be positive");
  }
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["replicas"] = replicas;
  j["evaluations"] = evaluations;
  j["steps"] = steps;
  j["demo_steps"] = demo_steps;
  j["eval_steps"] = eval_steps;
  j["output_dir"] = output_dir;
  j["environment"] = environment;
  if (!barrier_preset.empty()) {
    json b = barrier_params;
    b["preset"] = barrier_preset;
    j["barrier"] = b;
  }
  json l = {{"kind", learner.kind},
            {"step", learner.step},
            {"h0", learner.h0},
            {"prior_variance", learner.prior_variance},
            {"noise_variance", learner.noise_variance},
            {"normalize_inputs", learner.normalize_inputs}};
  json dims = json::array();
  for (const auto& d : learner.dims) {
    dims.push_back({{"apfbs", apfbs_json(d.apfbs)},
                    {"r_max", d.r_max},
                    {"kernels", d.kernels},
                    {"sigmas", d.sigmas},
                    {"state_inputs", d.state_inputs},
                    {"tau", d.tau}});
  }
  l["dims"] = dims;
  j["learner"] = l;
  j["value"] = {{"enabled", value.enabled},
                {"apfbs", apfbs_json(value.apfbs)},
                {"r_max", value.r_max},
                {"sigmas", value.sigmas},
                {"gamma", value.gamma},
                {"normalize_inputs", value.normalize_inputs}};
  j["policy"] = {{"update_period", policy.update_period}, {"explore_steps", policy.explore_steps}};
  j["deadlock"] = {{"enabled", deadlock.enabled}, {"window", deadlock.window}, {"threshold", deadlock.threshold}};
  j["lyapunov_c"] = lyapunov_c;
  j["baselines"] = {{"bayes_linear", baselines.bayes_linear},
                    {"gp_sarsa", baselines.gp_sarsa},
                    {"gp_sarsa2_freeze", baselines.gp_sarsa2_freeze ? json(*baselines.gp_sarsa2_freeze) : json(nullptr)},
                    {"gp_sigma", baselines.gp_sigma},
                    {"gp_noise", baselines.gp_noise},
                    {"gp_window", baselines.gp_window},
                    {"gp_refit_every", baselines.gp_refit_every}};
  j["extra"] = extra;
  return j;
}

json ini_to_json(const std::string& text) {
  json root = json::object();
  json* section = &root;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') reject("line " + std::to_string(lineno) + ": unterminated section header");
      const std::string name = trim(t.substr(1, t.size() - 2));
      if (name.empty()) reject("line " + std::to_string(lineno) + ": empty section name");
      section = &root;
      std::stringstream parts(name);
      std::string part;
      while (std::getline(parts, part, '.')) {
        part = trim(part);
        if (part.empty()) reject("line " + std::to_string(lineno) + ": empty section component");
        json& next = (*section)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) reject("line " + std::to_string(lineno) + ": section '" + name + "' clashes with a value");
        section = &next;
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) reject("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    std::string raw = trim(t.substr(eq + 1));
    if (key.empty()) reject("line " + std::to_string(lineno) + ": empty key");
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    (*section)[key] = value;
  }
  return root;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) reject("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) reject("'" + path + "' is not valid JSON");
    return parse_config(j);
  }
  return parse_config(ini_to_json(text));
}

namespace {

json quadrotor_env(std::vector<json> switches, std::vector<json> relocations) {
  return {{"kind", "quadrotor"},
          {"params", {1.0, 9.81, 1.0 / 0.027}},
          {"dt", 0.02},
          {"initial_state", {0.0, 0.0}},
          {"switches", switches},
          {"relocations", relocations}};
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"quadrotor-recovery", "quadrotor-rl", "unicycle-structure", "oracle-equivalence"};
}

ExperimentConfig preset_config(const std::string& name) {
  json j;
  if (name == "quadrotor-recovery") {
    j = {{"experiment", name},
         {"seed", 1},
         {"steps", 10000},
         {"output_dir", "out/quadrotor-recovery"},
         {"environment", quadrotor_env({json{{"step", 1000}, {"params", {1.0, 9.81, 5.0 / 0.027}}}}, {})},
         {"barrier", {{"preset", "quadrotor_box"}, {"limit", 3.0}, {"eta", 0.01}, {"rho1", 1e-3}}},
         {"learner", {{"kind", "parametric"}, {"step", 0.6}, {"h0", {0.0, 0.0, 0.0}}}},
         {"policy", {{"update_period", 1000}, {"explore_steps", 10000}}},
         {"baselines", {{"bayes_linear", true}}}};
  } else if (name == "quadrotor-rl") {
    std::vector<json> relocations;
    for (std::size_t s : {11000, 12000, 13000, 14000}) relocations.push_back({{"step", s}, {"lo", -3.0}, {"hi", 3.0}});
    j = {{"experiment", name},
         {"seed", 7},
         {"replicas", 15},
         {"evaluations", 5},
         {"steps", 10000},
         {"demo_steps", 5000},
         {"eval_steps", 1000},
         {"output_dir", "out/quadrotor-rl"},
         {"environment", quadrotor_env({json{{"step", 2500}, {"params", {1.0, 11.81, 0.9 / 0.027}}}}, relocations)},
         {"barrier", {{"preset", "quadrotor_box"}, {"limit", 3.0}, {"eta", 0.01}, {"rho1", 1e-3}}},
         {"learner", {{"kind", "parametric"}, {"step", 0.6}, {"h0", {0.0, 0.0, 0.0}}}},
         {"value",
          {{"enabled", true},
           {"apfbs", {{"step", 0.1}, {"window", 5}, {"l1", 0.01}, {"slab", 0.2}, {"novelty", 0.1}}},
           {"r_max", 600},
           {"sigmas", {50.0, 30.0, 10.0, 5.0, 2.0, 1.0}},
           {"gamma", 0.9}}},
         {"policy", {{"update_period", 1000}, {"explore_steps", 10000}}},
         {"baselines", {{"gp_sarsa", true}, {"gp_sarsa2_freeze", 600}, {"gp_sigma", 3.0}, {"gp_noise", 1e-6}}}};
  } else if (name == "unicycle-structure") {
    const json xy = {{"apfbs", {{"step", 0.3}, {"window", 5}, {"l1", 1e-4}, {"slab", 0.001}, {"novelty", 0.1}}},
                     {"r_max", 500},
                     {"kernels", "gaussian"},
                     {"sigmas", {10.0, 5.0, 2.0, 1.0, 0.5, 0.2}},
                     {"state_inputs", {2}},
                     {"tau", 0.1}};
    // Several atoms per block so the input-linear part spans both input directions; l1 prunes the rest.
    const json theta = {{"apfbs", {{"step", 0.3}, {"window", 10}, {"l1", 1e-4}, {"slab", 0.01}, {"novelty", 0.1}}},
                        {"r_max", 30},
                        {"kernels", "constant"},
                        {"tau", 0.1}};
    j = {{"experiment", name},
         {"seed", 3},
         {"steps", 1000},
         {"output_dir", "out/unicycle-structure"},
         {"environment", {{"kind", "unicycle"}, {"initial_state", {0.0, 0.0, 0.0}}}},
         {"barrier", {{"preset", "unicycle_oriented_box"}, {"x_max", 1.2}, {"y_max", 1.2}, {"upsilon", 0.1}, {"eta", 0.1}}},
         {"learner", {{"kind", "structured"}, {"normalize_inputs", true}, {"dims", {xy, xy, theta}}}},
         {"policy", {{"update_period", 1000}, {"explore_steps", 1000}}},
         {"deadlock", {{"enabled", true}, {"window", 10}, {"threshold", 1e-3}}},
         {"extra", {{"nonaffine_updates", 1000}}}};
  } else if (name == "oracle-equivalence") {
    j = {{"experiment", name},
         {"seed", 11},
         {"output_dir", "out/oracle-equivalence"},
         {"extra", {{"datasets", 50}, {"max_points", 30}, {"queries", 10}, {"expansions", 100}}}};
  } else {
    reject("unknown preset '" + name + "'");
  }
  return parse_config(j);
}

}  // namespace certrl
