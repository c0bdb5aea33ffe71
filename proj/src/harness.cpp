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

#include "certrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include "certrl/barrier.hpp"
#include "certrl/gpbaseline.hpp"
#include "certrl/learners.hpp"

namespace certrl {

using nlohmann::json;

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) {
  std::uint64_t z = master + (replica + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::span<const double> view(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::vector<double> join(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::vector<double> z(a.data(), a.data() + a.size());
  z.insert(z.end(), b.data(), b.data() + b.size());
  return z;
}

Eigen::VectorXd initial_parameters(const ModelLearnerConfig& c) {
  if (c.h0.empty()) return Eigen::VectorXd::Zero(3);
  return Eigen::Map<const Eigen::VectorXd>(c.h0.data(), static_cast<Eigen::Index>(c.h0.size()));
}

double quadrotor_dt(const Environment& env) {
  const auto* q = dynamic_cast<const QuadrotorEnv*>(&env);
  if (!q) throw std::invalid_argument("parametric learners need the quadrotor environment");
  return q->dt();
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t first_switch_step(const json& env) {
  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (const auto& s : env.value("switches", json::array())) best = std::min(best, s.at("step").get<std::size_t>());
  if (best == std::numeric_limits<std::size_t>::max()) throw std::invalid_argument("experiment needs a parameter switch");
  return best;
}

// Maps the box into [-1, 1] per coordinate without shifting it.
Eigen::VectorXd input_normalizer(const InputBox& box) { return box.lo.cwiseAbs().cwiseMax(box.hi.cwiseAbs()).cwiseInverse(); }

LoopConfig loop_config(const ExperimentConfig& c) {
  LoopConfig lc;
  lc.policy = c.policy;
  lc.deadlock = c.deadlock;
  lc.lyapunov_c = c.lyapunov_c;
  if (c.value.enabled && c.value.normalize_inputs) lc.value_inputs = InputMap::centered(make_environment(c.environment)->box());
  return lc;
}

std::vector<StepRecord> run_loop(ControlLoop& loop, std::size_t steps) {
  std::vector<StepRecord> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back(loop.step());
  return out;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::unique_ptr<DynamicsLearner> make_learner(const ModelLearnerConfig& c, const Environment& env) {
  if (c.kind == "parametric") {
    const double dt = quadrotor_dt(env);
    return std::make_unique<ParametricLearner>(ParametricModel(quadrotor_basis(dt), initial_parameters(c), c.step),
                                               env.input_dim());
  }
  if (c.kind == "bayes_linear") {
    const double dt = quadrotor_dt(env);
    const Eigen::VectorXd h0 = initial_parameters(c);
    BayesLinearState prior(h0, c.prior_variance * Eigen::MatrixXd::Identity(h0.size(), h0.size()), c.noise_variance);
    return std::make_unique<BayesLinearLearner>(std::move(prior), quadrotor_basis(dt), env.input_dim());
  }
  if (c.kind == "structured") {
    Eigen::VectorXd scale;
    if (c.normalize_inputs) scale = input_normalizer(env.box());
    return std::make_unique<StructuredLearner>(make_structured_model(c.dims, env.state_dim(), env.input_dim()),
                                               std::move(scale), env.angular_dims());
  }
  if (c.kind == "exact") return std::make_unique<ExactLearner>(&env);
  throw std::invalid_argument("unknown learner kind '" + c.kind + "'");
}

StructuredModel make_structured_model(const std::vector<StructuredDimConfig>& dims, std::size_t n_x, std::size_t n_u) {
  if (dims.size() != n_x) throw std::invalid_argument("structured model: need one dimension config per state");
  std::vector<std::vector<BlockKernel>> kernels;
  std::vector<ApfbsConfig> configs;
  std::vector<std::size_t> caps;
  for (const auto& d : dims) {
    std::vector<BlockKernel> ks;
    if (d.kernels == "constant") {
      ks.push_back({ModelBlock::p, KernelSpec::weighted(d.tau, KernelSpec::constant())});
      ks.push_back({ModelBlock::f, KernelSpec::weighted(d.tau, KernelSpec::constant())});
      ks.push_back({ModelBlock::g, KernelSpec::tensor(KernelSpec::constant(), KernelSpec::linear(), n_x)});
    } else if (d.state_inputs.empty()) {
      ks = default_block_kernels(n_x, n_u, d.sigmas, d.tau);
    } else {
      // Kernels restricted to a subset of the state coordinates.
      const std::size_t s = d.state_inputs.size();
      std::vector<std::size_t> with_inputs = d.state_inputs;
      for (std::size_t j = 0; j < n_u; ++j) with_inputs.push_back(n_x + j);
      for (double sigma : d.sigmas) {
        ks.push_back({ModelBlock::p, KernelSpec::weighted(d.tau, KernelSpec::select(with_inputs, KernelSpec::gaussian(sigma, s + n_u)))});
        ks.push_back({ModelBlock::f, KernelSpec::weighted(d.tau, KernelSpec::select(d.state_inputs, KernelSpec::gaussian(sigma, s)))});
        ks.push_back({ModelBlock::g, KernelSpec::tensor(KernelSpec::select(d.state_inputs, KernelSpec::gaussian(sigma, s)),
                                                        KernelSpec::linear(), n_x)});
      }
    }
    kernels.push_back(std::move(ks));
    configs.push_back(d.apfbs);
    caps.push_back(d.r_max);
  }
  return StructuredModel(n_x, n_u, std::move(kernels), std::move(configs), std::move(caps));
}

std::optional<QModel> make_qmodel(const ValueConfig& c, const Environment& env) {
  if (!c.enabled) return std::nullopt;
  return QModel(QKernelSpec::ladder(env.state_dim(), env.input_dim(), c.sigmas, c.gamma), c.apfbs, c.r_max);
}

std::vector<BarrierSpec> make_barriers(const ExperimentConfig& c) { return barrier_preset(c.barrier_preset, c.barrier_params); }

MetricsTable step_table(const std::vector<StepRecord>& records, const Environment& env,
                        const std::vector<BarrierSpec>& barriers, const std::vector<std::string>& extra_names,
                        const std::vector<std::vector<std::optional<double>>>& extra) {
  if (extra.size() != extra_names.size()) throw std::invalid_argument("step table: extra names and series differ");
  for (const auto& e : extra) {
    if (e.size() != records.size()) throw std::invalid_argument("step table: extra series length mismatch");
  }
  MetricsTable t;
  t.header.push_back("n");
  for (std::size_t i = 0; i < env.state_dim(); ++i) t.header.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < env.input_dim(); ++i) t.header.push_back("u" + std::to_string(i));
  t.header.push_back("reward");
  for (const auto& b : barriers) t.header.push_back("B_" + b.name);
  for (const auto& b : barriers) t.header.push_back("margin_" + b.name);
  t.header.push_back("psi_pred");
  for (const auto& n : extra_names) t.header.push_back(n);
  for (const char* h : {"param_error", "lyapunov", "switch", "relocation", "deadlock", "policy_update", "infeasible",
                        "explore", "outside"}) {
    t.header.push_back(h);
  }
  for (std::size_t r = 0; r < records.size(); ++r) {
    const StepRecord& rec = records[r];
    std::vector<std::optional<double>> row;
    row.reserve(t.header.size());
    row.emplace_back(static_cast<double>(rec.n));
    for (Eigen::Index i = 0; i < rec.x.size(); ++i) row.emplace_back(rec.x(i));
    for (Eigen::Index i = 0; i < rec.u.size(); ++i) row.emplace_back(rec.u(i));
    row.emplace_back(rec.reward);
    for (double v : rec.barrier_values) row.emplace_back(v);
    for (double v : rec.margins) row.emplace_back(v);
    row.push_back(rec.psi_prediction);
    for (const auto& e : extra) row.push_back(e[r]);
    row.push_back(rec.param_error);
    row.emplace_back(rec.lyapunov);
    const bool outside = std::any_of(rec.barrier_values.begin(), rec.barrier_values.end(), [](double b) { return b < 0.0; });
    for (bool f : {rec.switched, rec.relocated, rec.deadlock, rec.policy_update, rec.infeasible, rec.explore, outside}) {
      row.emplace_back(f ? 1.0 : 0.0);
    }
    t.add_row(std::move(row));
  }
  return t;
}

json RecoveryReport::to_json() const {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
  return {{"switch_step", switch_step},
          {"recovery_step", opt(recovery_step)},
          {"first_exit", opt(first_exit)},
          {"reentry", opt(reentry)},
          {"reentered_in_time", reentered_in_time},
          {"final_window_min_barrier", final_window_min_barrier},
          {"final_window_safe", final_window_safe},
          {"monotone_checks", monotone_checks},
          {"monotone_violations", monotone_violations},
          {"worst_increase", worst_increase},
          {"final_param_error", final_param_error ? json(*final_param_error) : json(nullptr)},
          {"recovered", recovered()}};
}

RecoveryReport recovery_report(const std::vector<StepRecord>& records, std::size_t switch_step, std::size_t final_window,
                               std::size_t reentry_limit, double monotone_slack) {
  RecoveryReport r;
  r.switch_step = switch_step;
  auto min_b = [](const StepRecord& rec) {
    double m = std::numeric_limits<double>::infinity();
    for (double b : rec.barrier_values) m = std::min(m, b);
    return m;
  };
  const std::size_t n = records.size();

  // Recovery step: scan backwards for the last unsafe row.
  std::optional<std::size_t> last_unsafe;
  for (std::size_t i = n; i-- > 0;) {
    if (min_b(records[i]) < 0.0) {
      last_unsafe = records[i].n;
      break;
    }
  }
  if (!last_unsafe || *last_unsafe < switch_step) {
    r.recovery_step = switch_step + 1;
  } else if (*last_unsafe + 1 < (n ? records.back().n + 1 : 0)) {
    r.recovery_step = *last_unsafe + 1;
  }

  for (const auto& rec : records) {
    if (rec.n < switch_step) continue;
    if (!r.first_exit) {
      if (min_b(rec) < 0.0) r.first_exit = rec.n;
    } else if (min_b(rec) >= 0.0) {
      r.reentry = rec.n;
      break;
    }
  }
  r.reentered_in_time = !r.first_exit || (r.reentry && *r.reentry - switch_step <= reentry_limit);

  r.final_window_min_barrier = std::numeric_limits<double>::infinity();
  const std::size_t start = n > final_window ? n - final_window : 0;
  for (std::size_t i = start; i < n; ++i) r.final_window_min_barrier = std::min(r.final_window_min_barrier, min_b(records[i]));
  r.final_window_safe = n >= final_window && r.final_window_min_barrier >= 0.0;

  for (const auto& rec : records) {
    if (rec.n < switch_step || rec.model_skipped || !(rec.model_residual > 0.0)) continue;
    if (!rec.param_error || !rec.param_error_before) continue;
    ++r.monotone_checks;
    const double inc = *rec.param_error - *rec.param_error_before;
    r.worst_increase = std::max(r.worst_increase, inc);
    if (inc > monotone_slack) ++r.monotone_violations;
  }
  if (!records.empty()) r.final_param_error = records.back().param_error;
  return r;
}

double nonaffine_probe_ratio(const StructuredDimConfig& dim, std::size_t updates, std::uint64_t seed,
                             bool normalize_inputs) {
  StructuredDimConfig d = dim;
  d.state_inputs.clear();
  const double half_width = 2.0;
  StructuredLearner learner(make_structured_model({d}, 1, 1),
                            normalize_inputs ? Eigen::VectorXd::Constant(1, 1.0 / half_width) : Eigen::VectorXd());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-half_width, half_width);
  for (std::size_t i = 0; i < updates; ++i) {
    const double x = coord(rng), u = coord(rng);
    learner.update(Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Constant(1, u),
                   Eigen::VectorXd::Constant(1, x + std::sin(x * u)));
  }
  return sparsity_report(learner.model()).p_over_g();
}

namespace {

RunArtifacts run_recovery(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t switch_step = first_switch_step(c.environment);
  std::vector<std::pair<std::string, ModelLearnerConfig>> runs = {{c.learner.kind, c.learner}};
  if (c.baselines.bayes_linear && c.learner.kind != "bayes_linear") {
    ModelLearnerConfig b = c.learner;
    b.kind = "bayes_linear";
    runs.emplace_back("bayes_linear", b);
  }
  RunArtifacts art;
  json learners = json::object();
  for (const auto& [label, lc] : runs) {
    auto env = make_environment(c.environment);
    auto learner = make_learner(lc, *env);
    const auto barriers = make_barriers(c);
    ControlLoop loop(std::move(env), std::move(learner), barriers, std::nullopt, loop_config(c), c.seed);
    const auto records = run_loop(loop, c.steps);
    const std::string path = (std::filesystem::path(c.output_dir) / (label + ".csv")).string();
    write_metrics(step_table(records, loop.env(), barriers), path);
    art.csv_paths.push_back(path);
    const RecoveryReport rep = recovery_report(records, switch_step);
    json s = rep.to_json();
    std::size_t infeasible = 0;
    for (const auto& r : records) infeasible += r.infeasible ? 1 : 0;
    s["infeasible_steps"] = infeasible;
    learners[label] = s;
  }
  art.summary = {{"experiment", c.experiment}, {"seed", c.seed}, {"learners", learners}, {"runtime_s", seconds_since(t0)}};
  return art;
}

struct ReplicaOutcome {
  json summary;
  std::string csv_path;
};

ReplicaOutcome run_rl_replica(const ExperimentConfig& c, std::size_t replica) {
  const std::uint64_t seed = replica_seed(c.seed, replica);
  auto env = make_environment(c.environment);
  auto learner = make_learner(c.learner, *env);
  auto qmodel = make_qmodel(c.value, *env);
  const auto barriers = make_barriers(c);
  ControlLoop loop(std::move(env), std::move(learner), barriers, std::move(qmodel), loop_config(c), seed);

  const std::size_t n_z = loop.env().state_dim() + loop.env().input_dim();
  std::optional<GpSarsaOnline> gp, gp2;
  if (c.baselines.gp_sarsa) {
    gp.emplace(KernelSpec::gaussian(c.baselines.gp_sigma, n_z), c.value.gamma, c.baselines.gp_noise, c.baselines.gp_window,
               std::nullopt, c.baselines.gp_refit_every);
  }
  if (c.baselines.gp_sarsa2_freeze) {
    gp2.emplace(KernelSpec::gaussian(c.baselines.gp_sigma, n_z), c.value.gamma, c.baselines.gp_noise,
                c.baselines.gp_window, c.baselines.gp_sarsa2_freeze, c.baselines.gp_refit_every);
  }

  NmseTracker own, gp_track, gp2_track;
  std::vector<StepRecord> records;
  std::vector<std::optional<double>> nmse, nmse_gp, nmse_gp2;
  const std::size_t total = c.steps + c.demo_steps;
  records.reserve(total);
  std::optional<double> nmse_early, nmse_late;
  for (std::size_t i = 0; i < total; ++i) {
    if (i == c.steps) {
      // Learning stops; the policy obtained at the end of learning is used from here on.
      loop.config().learn_model = false;
      loop.config().learn_value = false;
      loop.config().policy.update_period = std::numeric_limits<std::size_t>::max();
      loop.refresh_policy();
    }
    StepRecord rec = loop.step();
    const bool learning = i < c.steps;
    nmse.push_back(learning && rec.psi_prediction ? own.push(*rec.psi_prediction, rec.reward) : std::nullopt);
    if (learning && (gp || gp2)) {
      const auto z = join(rec.x, rec.u);
      // The successor input actually used as the SARSA target is the kernel policy's phi(x_next).
      const SafeControlResult nx = loop.act(rec.x_next);
      const auto z_next = join(rec.x_next, loop.env().box().clamp(nx.u));
      if (gp) {
        nmse_gp.push_back(gp_track.push(gp->predict_difference(z, z_next), rec.reward));
        gp->observe(z, z_next, rec.reward);
      }
      if (gp2) {
        nmse_gp2.push_back(gp2_track.push(gp2->predict_difference(z, z_next), rec.reward));
        gp2->observe(z, z_next, rec.reward);
      }
    } else {
      if (gp) nmse_gp.emplace_back(std::nullopt);
      if (gp2) nmse_gp2.emplace_back(std::nullopt);
    }
    if (i + 1 == std::min<std::size_t>(1000, c.steps)) nmse_early = nmse.back();
    if (i + 1 == c.steps) nmse_late = nmse.back();
    records.push_back(std::move(rec));
  }
  if (c.demo_steps == 0) loop.refresh_policy();

  // Greedy evaluation from uniform starts at rest, with the frozen model and policy.
  std::mt19937_64 start_rng(replica_seed(seed, 0xE7A1));
  std::uniform_real_distribution<double> pos(-3.0, 3.0);
  std::vector<Eigen::VectorXd> starts;
  for (std::size_t e = 0; e < c.evaluations; ++e) starts.push_back(Eigen::Vector2d(pos(start_rng), 0.0));
  const Environment& env_ref = loop.env();
  const Controller controller = [&](const Eigen::VectorXd& x) { return env_ref.box().clamp(loop.act(x).u); };
  const std::size_t horizon = truncation_horizon(c.value.gamma, env_ref.reward().max_abs);
  const auto values = evaluate_policy_value(env_ref, controller, starts, c.value.gamma, horizon);
  std::vector<double> finals, min_barriers;
  for (const auto& s : starts) {
    Eigen::VectorXd x = s;
    double mb = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < c.eval_steps; ++t) {
      mb = std::min(mb, min_barrier(barriers, view(x)));
      x = env_ref.transition(x, controller(x));
    }
    finals.push_back(std::fabs(x(0)));
    min_barriers.push_back(mb);
  }
  const std::size_t settled = static_cast<std::size_t>(std::count_if(finals.begin(), finals.end(), [](double v) { return v <= 0.5; }));

  std::vector<std::string> names = {"nmse"};
  std::vector<std::vector<std::optional<double>>> extra = {nmse};
  if (gp) {
    names.push_back("nmse_gp_sarsa");
    extra.push_back(nmse_gp);
  }
  if (gp2) {
    names.push_back("nmse_gp_sarsa2");
    extra.push_back(nmse_gp2);
  }
  ReplicaOutcome out;
  out.csv_path = (std::filesystem::path(c.output_dir) / ("replica_" + std::to_string(replica) + ".csv")).string();
  write_metrics(step_table(records, loop.env(), barriers, names, extra), out.csv_path);

  std::vector<json> start_list;
  for (const auto& s : starts) start_list.push_back(s(0));
  out.summary = {{"replica", replica},
                 {"seed", seed},
                 {"nmse_at_1000", nmse_early ? json(*nmse_early) : json(nullptr)},
                 {"nmse_at_end", nmse_late ? json(*nmse_late) : json(nullptr)},
                 {"nmse_gp_sarsa_at_end", gp && !nmse_gp.empty() && c.steps <= nmse_gp.size() && nmse_gp[c.steps - 1]
                                               ? json(*nmse_gp[c.steps - 1])
                                               : json(nullptr)},
                 {"nmse_gp_sarsa2_at_end", gp2 && c.steps <= nmse_gp2.size() && nmse_gp2[c.steps - 1]
                                               ? json(*nmse_gp2[c.steps - 1])
                                               : json(nullptr)},
                 {"dictionary_size", loop.qmodel() ? loop.qmodel()->filter().size() : 0},
                 {"horizon", horizon},
                 {"starts", start_list},
                 {"values", values},
                 {"mean_value", mean_of(values)},
                 {"final_abs_position", finals},
                 {"settled_evaluations", settled},
                 {"eval_min_barrier", min_barriers},
                 {"final_param_error", records.empty() || !records.back().param_error ? json(nullptr)
                                                                                      : json(*records.back().param_error)}};
  return out;
}

RunArtifacts run_rl(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ReplicaOutcome> outcomes(c.replicas);
  std::vector<std::exception_ptr> errors(c.replicas);
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(c.replicas, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < c.replicas; r = next++) {
        try {
          outcomes[r] = run_rl_replica(c, r);
        } catch (...) {
          errors[r] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  RunArtifacts art;
  json replicas = json::array();
  std::vector<double> all_values;
  for (const auto& o : outcomes) {
    art.csv_paths.push_back(o.csv_path);
    replicas.push_back(o.summary);
    for (double v : o.summary.at("values")) all_values.push_back(v);
  }
  art.summary = {{"experiment", c.experiment},
                 {"seed", c.seed},
                 {"replicas", replicas},
                 {"value_mean", mean_of(all_values)},
                 {"value_std", std_of(all_values)},
                 {"runtime_s", seconds_since(t0)}};
  return art;
}

RunArtifacts run_unicycle(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  auto env = make_environment(c.environment);
  auto learner = make_learner(c.learner, *env);
  const auto barriers = make_barriers(c);
  ControlLoop loop(std::move(env), std::move(learner), barriers, std::nullopt, loop_config(c), c.seed);
  const auto records = run_loop(loop, c.steps);
  RunArtifacts art;
  const std::string path = (std::filesystem::path(c.output_dir) / "unicycle.csv").string();
  write_metrics(step_table(records, loop.env(), barriers), path);
  art.csv_paths.push_back(path);

  std::size_t deadlocks = 0, infeasible = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    deadlocks += r.deadlock ? 1 : 0;
    infeasible += r.infeasible ? 1 : 0;
    if (!r.deadlock && !r.infeasible) {
      for (double m : r.margins) worst_margin = std::min(worst_margin, m);
    }
  }
  json s = {{"experiment", c.experiment}, {"seed", c.seed}, {"deadlock_overrides", deadlocks},
            {"infeasible_steps", infeasible}, {"worst_certified_margin", worst_margin}};
  if (const auto* sl = dynamic_cast<const StructuredLearner*>(&loop.learner())) {
    const SparsityReport rep = sparsity_report(sl->model());
    s["sparsity"] = rep.to_json();
    s["p_over_g"] = rep.p_over_g();
  }
  const std::size_t probe = c.extra.value("nonaffine_updates", std::size_t{0});
  if (probe > 0 && !c.learner.dims.empty()) {
    s["nonaffine_p_over_g"] = nonaffine_probe_ratio(c.learner.dims.front(), probe, replica_seed(c.seed, 1),
                                                c.learner.normalize_inputs);
  }
  s["runtime_s"] = seconds_since(t0);
  art.summary = s;
  return art;
}

RunArtifacts run_oracle_equivalence(const ExperimentConfig& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t datasets = c.extra.value("datasets", std::size_t{50});
  const std::size_t max_points = std::max<std::size_t>(2, c.extra.value("max_points", std::size_t{30}));
  const std::size_t queries = c.extra.value("queries", std::size_t{10});
  const std::size_t expansions = c.extra.value("expansions", std::size_t{100});
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;

  MetricsTable gp_table;
  gp_table.header = {"dataset", "points", "gamma", "max_mean_gap", "max_variance_gap"};
  double worst_mean = 0.0, worst_var = 0.0;
  const double gammas[] = {0.5, 0.9, 0.99};
  for (std::size_t d = 0; d < datasets; ++d) {
    const std::size_t dim = 2 + d % 2;
    const std::size_t points = 1 + static_cast<std::size_t>(unit(rng) * static_cast<double>(max_points));
    GpSarsaState st{KernelSpec::gaussian(0.5 + 1.5 * unit(rng), dim), gammas[d % 3], {}, {}, {}, std::nullopt};
    auto draw = [&] {
      std::vector<double> z(dim);
      for (auto& v : z) v = normal(rng);
      return z;
    };
    st.z.push_back(draw());
    for (std::size_t i = 0; i < std::min(points, max_points); ++i) st.observe(draw(), normal(rng), 0.01 + 0.1 * unit(rng));
    double gm = 0.0, gv = 0.0;
    for (std::size_t q = 0; q < queries; ++q) {
      const auto z = draw();
      const Posterior a = gp_sarsa_posterior(st, z), b = psi_route_posterior(st, z);
      gm = std::max(gm, std::fabs(a.mean - b.mean));
      gv = std::max(gv, std::fabs(a.variance - b.variance));
    }
    worst_mean = std::max(worst_mean, gm);
    worst_var = std::max(worst_var, gv);
    gp_table.add_row({static_cast<double>(d), static_cast<double>(st.transitions()), st.gamma, gm, gv});
  }

  MetricsTable iso_table;
  iso_table.header = {"expansion", "psi_norm", "q_norm", "gap", "gram_min_eigenvalue"};
  double worst_gap = 0.0, worst_eig = std::numeric_limits<double>::infinity();
  const std::vector<double> sigmas = {0.7, 1.5};
  for (std::size_t e = 0; e < expansions; ++e) {
    const QKernelSpec spec = QKernelSpec::ladder(2, 1, sigmas, gammas[e % 3]);
    QModel a(spec, ApfbsConfig{}, 1000), b(spec, ApfbsConfig{}, 1000);
    std::vector<std::vector<double>> centers;
    const std::size_t atoms = 1 + e % 8;
    for (std::size_t j = 0; j < atoms; ++j) {
      std::vector<double> zw(2 * spec.pair_dim());
      for (auto& v : zw) v = normal(rng);
      centers.push_back(zw);
      const std::size_t m = j % spec.num_kernels();
      a.filter().append_atom(m, zw, normal(rng));
      // Shared atoms exercise exact cancellation; the rest differ between the two models.
      if (j % 2 == 0) b.filter().append_atom(m, zw, normal(rng));
    }
    const RkhsNorms n = rkhs_norms(a, b);
    const double gap = std::fabs(n.psi - n.q);
    const Eigen::MatrixXd gram = gram_matrix(spec.paired_kernel(0), centers);
    const double eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    worst_gap = std::max(worst_gap, gap);
    worst_eig = std::min(worst_eig, eig);
    iso_table.add_row({static_cast<double>(e), n.psi, n.q, gap, eig});
  }

  RunArtifacts art;
  const std::string p1 = (std::filesystem::path(c.output_dir) / "gp_equivalence.csv").string();
  const std::string p2 = (std::filesystem::path(c.output_dir) / "isometry.csv").string();
  write_metrics(gp_table, p1);
  write_metrics(iso_table, p2);
  art.csv_paths = {p1, p2};
  art.summary = {{"experiment", c.experiment},
                 {"seed", c.seed},
                 {"max_mean_gap", worst_mean},
                 {"max_variance_gap", worst_var},
                 {"max_isometry_gap", worst_gap},
                 {"min_gram_eigenvalue", worst_eig},
                 {"runtime_s", seconds_since(t0)}};
  return art;
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  RunArtifacts art;
  if (config.experiment == "quadrotor-recovery") {
    art = run_recovery(config);
  } else if (config.experiment == "quadrotor-rl") {
    art = run_rl(config);
  } else if (config.experiment == "unicycle-structure") {
    art = run_unicycle(config);
  } else {
    art = run_oracle_equivalence(config);
  }
  art.summary["config"] = config.to_json();
  art.summary["csv"] = art.csv_paths;
  art.summary_path = (std::filesystem::path(config.output_dir) / "summary.json").string();
  write_json(art.summary, art.summary_path);
  return art;
}

}  // namespace certrl
