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

// Command-line front end: run experiments, run the acceptance checks, and
// summarize metrics CSVs.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "certrl/config.hpp"
#include "certrl/harness.hpp"
#include "certrl/metrics.hpp"
#include "certrl_verify/acceptance.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
  return code;
}

certrl::ExperimentConfig resolve_config(const std::string& source) {
  if (std::filesystem::exists(source)) return certrl::load_config(source);
  for (const auto& name : certrl::preset_names()) {
    if (name == source) return certrl::preset_config(name);
  }
  throw std::invalid_argument("config: '" + source + "' is neither a file nor a preset name");
}

json summarize(const certrl::MetricsTable& t) {
  json cols = json::object();
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    std::size_t count = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    std::optional<double> last;
    for (const auto& row : t.rows) {
      if (!row[c]) continue;
      const double v = *row[c];
      ++count;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      last = v;
    }
    json col = {{"count", count}};
    if (count) {
      col["min"] = lo;
      col["max"] = hi;
      col["mean"] = sum / static_cast<double>(count);
      col["last"] = *last;
    }
    cols[t.header[c]] = col;
  }
  return {{"rows", t.rows.size()}, {"columns", cols}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Barrier-certified adaptive reinforcement learning experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a config file or preset name");
  std::string config_source;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> replicas;
  run->add_option("config", config_source, "Config file (JSON or sectioned key-value) or preset name")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out, "Override the output directory");
  run->add_option("--replicas", replicas, "Override the replica count");

  auto* verify = app.add_subcommand("verify", "Run the acceptance checks");
  std::vector<int> only;
  std::string scratch = "acceptance_out";
  verify->add_option("--only", only, "Criterion ids to run")->delimiter(',');
  verify->add_option("--out", scratch, "Directory for experiment artifacts");

  auto* summ = app.add_subcommand("summarize", "Column statistics of a metrics CSV as JSON");
  std::string csv;
  summ->add_option("csv", csv, "Metrics CSV")->required();

  auto* presets = app.add_subcommand("presets", "List presets or write them as JSON files");
  std::optional<std::string> write_dir;
  presets->add_option("--write", write_dir, "Directory to write <preset>.json files into");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what(), 2);
  }

  try {
    if (*run) {
      certrl::ExperimentConfig cfg = resolve_config(config_source);
      if (seed) cfg.seed = *seed;
      if (out) cfg.output_dir = *out;
      if (replicas) cfg.replicas = *replicas;
      const auto art = certrl::run_experiment(cfg);
      json s = art.summary;
      s.erase("config");
      std::cout << s.dump(2) << '\n';
      std::cout << "summary: " << art.summary_path << '\n';
      return 0;
    }
    if (*verify) {
      certrl::acceptance::Options opt;
      opt.scratch_dir = scratch;
      const auto results = certrl::acceptance::run_all(opt, only);
      bool ok = !results.empty();
      for (const auto& r : results) {
        std::cout << certrl::acceptance::format(r) << std::endl;
        ok = ok && r.pass;
      }
      return ok ? 0 : 1;
    }
    if (*summ) {
      std::cout << summarize(certrl::read_metrics(csv)).dump(2) << '\n';
      return 0;
    }
    if (*presets) {
      for (const auto& name : certrl::preset_names()) {
        if (write_dir) {
          std::filesystem::create_directories(*write_dir);
          const std::string path = (std::filesystem::path(*write_dir) / (name + ".json")).string();
          std::ofstream f(path);
          json j = certrl::preset_config(name).to_json();
          f << j.dump(2) << '\n';
          if (!f) throw std::runtime_error("cannot write '" + path + "'");
          std::cout << path << '\n';
        } else {
          std::cout << name << '\n';
        }
      }
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    return fail("invalid_config", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}
