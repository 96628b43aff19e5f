//
// Copyright 2026 The rmlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// rmlab: config-driven Monte Carlo lab for robust, heavy-tailed, and private
// mean estimation. Subcommands: generate, estimate, run, sweep, audit.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rmlab/audit.hpp"
#include "rmlab/bench.hpp"

namespace {

using namespace rmlab;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAllFailed = 3;

bench::RawConfig load_raw_or_die(const std::string& path) {
  return bench::load_raw_config(path);
}

void apply_overrides(bench::ExperimentConfig& cfg, std::optional<std::uint64_t> seed,
                     const std::string& out, std::optional<std::size_t> workers) {
  if (seed) cfg.master_seed = *seed;
  if (!out.empty()) cfg.output_path = out;
  if (workers) cfg.workers = *workers;
}

int cmd_generate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  bench::ExperimentConfig cfg = bench::interpret_config(load_raw_or_die(config_path));
  apply_overrides(cfg, seed, out, std::nullopt);
  if (cfg.output_path.empty())
    throw bench::ConfigError("generate needs --out or [experiment] output");
  RngStream base(cfg.master_seed, 0);
  RngStream data_rng = base.substream(0);
  RngStream attack_rng = base.substream(1);
  const Dataset clean = synth::sample(cfg.distribution, cfg.n, data_rng);
  const auto result = synth::contaminate(clean, cfg.attack, attack_rng);
  io::save_dataset(result.data, cfg.output_path);
  std::printf("wrote %zu x %zu dataset to %s (%zu corrupted rows)\n", result.data.n(),
              result.data.dim(), cfg.output_path.c_str(), result.corrupted.size());
  return kExitOk;
}

int cmd_estimate(const std::string& config_path, const std::string& input,
                 std::optional<std::uint64_t> seed, const std::string& out,
                 const std::string& probs_out) {
  bench::ExperimentConfig cfg = bench::interpret_config(load_raw_or_die(config_path));
  const Dataset x = io::load_dataset(input);
  RngStream rng(seed.value_or(cfg.master_seed), 0);
  RngStream est_rng = rng.substream(2);

  nlohmann::json j;
  EstimatorReport report;
  if (cfg.estimator.kind == bench::EstimatorKind::private_mom) {
    // Keep the full output distribution around for audit records.
    dp::PrivateMoMConfig pm;
    pm.c1 = cfg.estimator.c1;
    pm.c2 = cfg.estimator.c2;
    const auto res =
        dp::private_mom_mean(x, {cfg.estimator.epsilon, 0.0}, pm, est_rng);
    report = res.report;
    j["cover_size"] = res.cover.points.size();
    j["bucket_count"] = res.k;
    if (!probs_out.empty()) {
      std::ofstream f(probs_out);
      if (!f) throw std::runtime_error("cannot open for writing: " + probs_out);
      dp::write_probabilities_csv(f, res.probabilities);
    }
  } else {
    report = bench::apply_estimator(cfg.estimator, x, est_rng);
    if (!probs_out.empty())
      throw bench::ConfigError("--probs only applies to the private_mom estimator");
  }
  j["estimate"] = report.estimate;
  j["iterations"] = report.iterations;
  j["removed_count"] = report.removed_indices.size();
  j["final_top_eigenvalue"] = report.final_top_eigenvalue;
  j["warnings"] = warnings_to_string(report.warnings);
  const std::string text = j.dump(2);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot open for writing: " + out);
    f << text << '\n';
  }
  std::cout << text << '\n';
  return kExitOk;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out, std::optional<std::size_t> workers) {
  bench::ExperimentConfig cfg = bench::interpret_config(load_raw_or_die(config_path));
  apply_overrides(cfg, seed, out, workers);
  const bench::RunResult result = bench::run_trials(cfg);
  if (!cfg.output_path.empty()) {
    std::ofstream f(cfg.output_path);
    if (!f) throw std::runtime_error("cannot open for writing: " + cfg.output_path);
    bench::write_records_csv(f, result.records);
  }
  const bench::Summary& s = result.summary;
  std::printf("trials=%zu failures=%zu mean=%.6g median=%.6g p95=%.6g p99=%.6g p99.9=%.6g\n",
              s.trials, s.failures, s.mean, s.median, s.p95, s.p99, s.p999);
  if (s.failures == s.trials) {
    std::fprintf(stderr, "all trials failed: %s\n",
                 result.records.empty() ? "?" : result.records.front().failure.c_str());
    return kExitAllFailed;
  }
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out, std::optional<std::size_t> workers) {
  bench::RawConfig raw = load_raw_or_die(config_path);
  if (seed) raw.sections["experiment"]["master_seed"] = std::to_string(*seed);
  if (workers) raw.sections["experiment"]["workers"] = std::to_string(*workers);
  const auto rows = bench::sweep(raw);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot open for writing: " + out);
    bench::write_sweep_csv(f, rows);
  }
  bench::write_sweep_csv(std::cout, rows);
  std::size_t failed_cells = 0;
  for (const auto& row : rows)
    if (!row.ok) ++failed_cells;
  if (failed_cells == rows.size()) return kExitAllFailed;
  return kExitOk;
}

int cmd_audit(const std::string& mechanism, std::size_t instances,
              std::optional<std::uint64_t> seed, const std::string& out) {
  const std::uint64_t master = seed.value_or(0);
  dp::audit::AuditOutcome outcome;
  if (mechanism == "exponential") {
    outcome = dp::audit::audit_exponential_mechanism(instances, RngStream(master, 0));
  } else if (mechanism == "inverse_sensitivity_median") {
    outcome = dp::audit::audit_inverse_sensitivity_median(instances, RngStream(master, 1));
  } else if (mechanism == "private_mom") {
    outcome = dp::audit::audit_private_mom(instances, RngStream(master, 2));
  } else {
    throw bench::ConfigError("unknown mechanism: " + mechanism +
                             " (want exponential | inverse_sensitivity_median | private_mom)");
  }
  std::printf("%s: %zu instances, worst audit %.12g at epsilon %.6g, excess %.3e -> %s\n",
              mechanism.c_str(), outcome.instances, outcome.worst_audit,
              outcome.worst_epsilon, outcome.worst_excess,
              outcome.within(1e-9) ? "PASS" : "FAIL");
  if (!out.empty()) {
    // Audit record: re-run the worst-free summary as CSV probabilities demo.
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot open for writing: " + out);
    f << "mechanism,instances,worst_audit,worst_epsilon,excess\n"
      << mechanism << ',' << outcome.instances << ',' << outcome.worst_audit << ','
      << outcome.worst_epsilon << ',' << outcome.worst_excess << '\n';
  }
  return outcome.within(1e-9) ? kExitOk : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust / heavy-tailed / private mean estimation lab"};
  app.require_subcommand(1);

  std::string config_path, out, input, mechanism = "exponential";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::size_t instances = 1000;

  auto* generate = app.add_subcommand("generate", "sample a dataset file per config");
  generate->add_option("--config", config_path, "config file")->required();
  generate->add_option("--seed", seed, "master seed override");
  generate->add_option("--out", out, "dataset path (.csv or .rmd)");

  auto* estimate = app.add_subcommand("estimate", "run one estimator on a dataset file");
  estimate->add_option("--config", config_path, "config file")->required();
  estimate->add_option("--in", input, "dataset path")->required();
  estimate->add_option("--seed", seed, "seed override");
  estimate->add_option("--out", out, "write the report json here");
  std::string probs_out;
  estimate->add_option("--probs", probs_out,
                       "CSV export of the private_mom output distribution");

  auto* run = app.add_subcommand("run", "Monte Carlo trials per config");
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--seed", seed, "master seed override");
  run->add_option("--out", out, "trial records CSV path");
  run->add_option("--workers", workers, "worker threads (0 = hardware)");

  auto* sw = app.add_subcommand("sweep", "cross-product parameter sweep");
  sw->add_option("--config", config_path, "config file with a [sweep] section")->required();
  sw->add_option("--seed", seed, "master seed override");
  sw->add_option("--out", out, "summary CSV path");
  sw->add_option("--workers", workers, "worker threads");

  auto* audit = app.add_subcommand("audit", "neighboring-pair privacy audits");
  audit->add_option("--mechanism", mechanism,
                    "exponential | inverse_sensitivity_median | private_mom");
  audit->add_option("--instances", instances, "number of randomized instances");
  audit->add_option("--seed", seed, "master seed");
  audit->add_option("--out", out, "audit summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) return cmd_generate(config_path, seed, out);
    if (*estimate) return cmd_estimate(config_path, input, seed, out, probs_out);
    if (*run) return cmd_run(config_path, seed, out, workers);
    if (*sw) return cmd_sweep(config_path, seed, out, workers);
    if (*audit) return cmd_audit(mechanism, instances, seed, out);
  } catch (const bench::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitConfig;
}
