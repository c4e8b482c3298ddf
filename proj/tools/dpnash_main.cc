// Copyright 2026 The dpnash Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: run, summarize, compare and validate experiments.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "dpnash/cournot.h"
#include "dpnash/game_core.h"
#include "dpnash/harness.h"
#include "dpnash/network.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

struct Overrides {
  int seeds = 0;
  int64_t iters = -1;
  std::string out;
  int jobs = 1;
};

int ExitCodeFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kNotFound:
      return kExitConfigError;
    default:
      return kExitRunFailure;
  }
}

absl::StatusOr<dpnash::ExperimentConfig> LoadWithOverrides(
    const std::string& path, const Overrides& o, bool apply_out) {
  absl::StatusOr<dpnash::ExperimentConfig> config = dpnash::LoadConfig(path);
  if (!config.ok()) return config.status();
  std::optional<int> seeds;
  if (o.seeds > 0) seeds = o.seeds;
  std::optional<int64_t> iters;
  if (o.iters >= 0) iters = o.iters;
  std::optional<std::filesystem::path> out;
  if (apply_out && !o.out.empty()) out = o.out;
  if (auto s = dpnash::ApplyOverrides(*config, seeds, iters, out); !s.ok()) {
    return s;
  }
  return config;
}

void PrintWarnings(const dpnash::ExperimentConfig& config) {
  for (const std::string& w : config.warnings) {
    std::cerr << "warning: " << config.label << ": " << w << "\n";
  }
}

int RunCommand(const std::string& path, const Overrides& o) {
  absl::StatusOr<dpnash::ExperimentConfig> config =
      LoadWithOverrides(path, o, true);
  if (!config.ok()) {
    std::cerr << "error: " << config.status().message() << "\n";
    return kExitConfigError;
  }
  PrintWarnings(*config);
  dpnash::ExecutionOptions execution;
  execution.jobs = o.jobs;
  absl::StatusOr<dpnash::ExperimentResult> result =
      dpnash::RunExperiment(*config, execution);
  if (!result.ok()) {
    std::cerr << "error: " << result.status().message() << "\n";
    return ExitCodeFor(result.status());
  }
  for (const dpnash::RunRecord& r : result->records) {
    if (r.ok) {
      std::cout << absl::StrFormat("%s  final gap %.6g  consensus %.3g  eps %.6g\n",
                                   r.run_id, r.final_gap(),
                                   r.final_consensus_error(), r.final_eps());
    } else {
      std::cout << r.run_id << "  FAILED: " << r.error << "\n";
    }
  }
  std::cout << "outputs in " << config->output.directory.string() << "\n";
  return result->all_ok() ? kExitOk : kExitRunFailure;
}

int SummarizeCommand(const std::string& dir, const Overrides& o) {
  absl::StatusOr<std::vector<dpnash::RunRecord>> records =
      dpnash::ReadTrajectoryDirectory(dir);
  if (!records.ok()) {
    std::cerr << "error: " << records.status().message() << "\n";
    return kExitConfigError;
  }
  absl::StatusOr<std::vector<dpnash::SummaryRow>> rows =
      dpnash::Summarize(*records);
  if (!rows.ok()) {
    std::cerr << "error: " << rows.status().message() << "\n";
    return kExitRunFailure;
  }
  const std::filesystem::path target =
      o.out.empty() ? std::filesystem::path(dir) / "summary.csv"
                    : std::filesystem::path(o.out);
  std::ofstream out(target);
  dpnash::WriteSummaryCsv(*rows, out);
  if (!out) {
    std::cerr << "error: cannot write " << target.string() << "\n";
    return kExitRunFailure;
  }
  const dpnash::SummaryRow& last = rows->back();
  std::cout << absl::StrFormat(
      "%d runs, k=%d: gap mean %.6g median %.6g variance %.6g\nwrote %s\n",
      last.runs, last.k, last.gap_mean, last.gap_median, last.gap_variance,
      target.string());
  return kExitOk;
}

int CompareCommand(const std::vector<std::string>& paths, const Overrides& o) {
  const std::filesystem::path root = o.out.empty() ? "out/compare" : o.out;
  std::vector<dpnash::ExperimentConfig> configs;
  for (const std::string& path : paths) {
    absl::StatusOr<dpnash::ExperimentConfig> config =
        LoadWithOverrides(path, o, false);
    if (!config.ok()) {
      std::cerr << "error: " << config.status().message() << "\n";
      return kExitConfigError;
    }
    if (auto s = dpnash::ApplyOverrides(*config, std::nullopt, std::nullopt,
                                        root / config->label);
        !s.ok()) {
      std::cerr << "error: " << s.message() << "\n";
      return kExitConfigError;
    }
    PrintWarnings(*config);
    configs.push_back(*std::move(config));
  }
  dpnash::ExecutionOptions execution;
  execution.jobs = o.jobs;
  absl::StatusOr<dpnash::ComparisonTable> table =
      dpnash::CompareAlgorithms(configs, execution);
  if (!table.ok()) {
    std::cerr << "error: " << table.status().message() << "\n";
    return ExitCodeFor(table.status());
  }
  std::ofstream csv(root / "comparison.csv");
  dpnash::WriteComparisonCsv(*table, csv);
  std::ofstream budget(root / "comparison_budget.csv");
  dpnash::WriteComparisonBudgetCsv(*table, budget);
  if (!csv || !budget) {
    std::cerr << "error: cannot write comparison files in " << root.string()
              << "\n";
    return kExitRunFailure;
  }
  bool all_ok = true;
  for (const dpnash::AlgorithmColumn& c : table->columns) {
    std::cout << absl::StrFormat(
        "%-24s median final gap %.6g  eps spent %.6g  eps bound %.6g\n",
        c.label, c.final_gap_median, c.eps_spent, c.eps_guarantee);
    all_ok = all_ok && c.all_ok;
  }
  std::cout << "wrote " << (root / "comparison.csv").string() << "\n";
  return all_ok ? kExitOk : kExitRunFailure;
}

int ValidateCommand(const std::string& path) {
  absl::StatusOr<dpnash::ExperimentConfig> config = dpnash::LoadConfig(path);
  if (!config.ok()) {
    std::cerr << "error: " << config.status().message() << "\n";
    return kExitConfigError;
  }
  for (const std::string& line : config->checks) std::cout << line << "\n";
  PrintWarnings(*config);
  // Any positive budget resolves a matched config for the checks below.
  absl::StatusOr<dpnash::PreparedExperiment> prepared =
      dpnash::Prepare(*config, config->privacy.match_eps
                                   ? std::optional<double>(1.0)
                                   : std::nullopt);
  if (!prepared.ok()) {
    std::cerr << "error: " << prepared.status().message() << "\n";
    return kExitConfigError;
  }
  bool pass = true;
  const dpnash::CouplingReport coupling =
      dpnash::ValidateCoupling(prepared->weights.entries());
  std::cout << absl::StrFormat("%s coupling: ||I + L - 11^T/m|| = %.6g\n",
                               coupling.pass() ? "PASS" : "FAIL",
                               coupling.norm_value);
  pass = pass && coupling.pass();
  absl::StatusOr<dpnash::CournotMonotonicityReport> mono =
      dpnash::VerifyMonotonicityCournot(prepared->instance);
  if (mono.ok()) {
    std::cout << absl::StrFormat(
        "%s strict monotonicity: min eigenvalue of symmetrized Jacobian %.6g\n",
        mono->pass ? "PASS" : "FAIL", mono->min_eigenvalue);
    pass = pass && mono->pass;
  }
  absl::StatusOr<double> residual =
      dpnash::FixedPointResidual(prepared->game, prepared->x_star, 0.01);
  if (residual.ok()) {
    std::cout << absl::StrFormat("info reference equilibrium residual %.3g\n",
                                 *residual);
  }
  if (config->algorithm == dpnash::AlgorithmVariant::kDpWeakening) {
    absl::StatusOr<int64_t> threshold =
        dpnash::ContractionThreshold(prepared->weights, config->gamma);
    if (threshold.ok()) {
      std::cout << "info contraction threshold k = " << *threshold << "\n";
    }
  }
  if (prepared->nu.has_value() && !config->privacy.match_eps) {
    std::cout << absl::StrFormat("info privacy budget bound %.6g (c_bar %g)\n",
                                 prepared->eps_guarantee,
                                 config->privacy.c_bar);
  }
  return pass ? kExitOk : kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private distributed Nash equilibrium seeking"};
  app.require_subcommand(1);
  Overrides overrides;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--seeds", overrides.seeds, "Number of seeds (0..N-1)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--iters", overrides.iters, "Iterations per run")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out", overrides.out, "Output directory");
    sub->add_option("--jobs", overrides.jobs, "Concurrent runs")
        ->check(CLI::PositiveNumber);
  };

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run every seed of a config");
  run->add_option("config", config_path, "Experiment config")->required();
  add_overrides(run);

  std::string directory;
  CLI::App* summarize =
      app.add_subcommand("summarize", "Summarize trajectory CSVs in a directory");
  summarize->add_option("dir", directory, "Run output directory")->required();
  summarize->add_option("--out", overrides.out, "Summary CSV path");

  std::vector<std::string> compare_paths;
  CLI::App* compare =
      app.add_subcommand("compare", "Run configs side by side on one instance");
  compare->add_option("configs", compare_paths, "Experiment configs")
      ->required();
  add_overrides(compare);

  CLI::App* validate =
      app.add_subcommand("validate", "Check assumptions and schedules only");
  validate->add_option("config", config_path, "Experiment config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (*run) return RunCommand(config_path, overrides);
  if (*summarize) return SummarizeCommand(directory, overrides);
  if (*compare) return CompareCommand(compare_paths, overrides);
  if (*validate) return ValidateCommand(config_path);
  return kExitConfigError;
}
