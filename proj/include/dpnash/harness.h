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

#ifndef DPNASH_HARNESS_H_
#define DPNASH_HARNESS_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "absl/status/statusor.h"
#include "dpnash/cournot.h"
#include "dpnash/game_core.h"
#include "dpnash/network.h"
#include "dpnash/schedules.h"
#include "dpnash/solver.h"

namespace dpnash {

struct GameSourceConfig {
  enum class Kind { kCournot, kInstanceFile, kToy };
  Kind kind = Kind::kCournot;
  // kCournot
  uint64_t seed = 0;
  int num_firms = 20;
  int num_markets = 7;
  double participation_density = 0.4;
  bool general_quadratic_cost = false;
  // kInstanceFile, resolved against the config's directory.
  std::filesystem::path instance_file;
  // kToy
  SymmetricCournotParams toy;
};

struct GraphConfig {
  enum class Kind { kGenerator, kEdges, kRing, kPath, kComplete };
  Kind kind = Kind::kGenerator;
  uint64_t seed = 0;
  double extra_edge_probability = 0.1;
  std::vector<std::pair<int, int>> edges;
  WeightRule rule = WeightRule::Metropolis();
};

struct OracleConfig {
  GradientOracle::Mode mode = GradientOracle::Mode::kExact;
  // Explicit μ^k; when absent with additive mode, μ = sqrt(d·variance).
  std::optional<PolySchedule> mu;
  double coordinate_variance = 1.0;
};

struct PrivacyConfig {
  double c_bar = 1.0;
  // Exactly one of: explicit ν (schedules.nu), a numeric target, or "match".
  std::optional<double> eps_target;
  bool match_eps = false;
  // ν' for calibration; defaults to k^0.3 shape when absent.
  std::optional<PolySchedule> nu_shape;
};

struct RunConfig {
  int64_t iterations = 20000;
  int64_t record_every = 100;
  std::vector<uint64_t> seeds;
  uint64_t master_seed = 1;
  int64_t first_index = 0;
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  bool emit_ledger = true;
};

struct ExperimentConfig {
  std::string label;
  GameSourceConfig game;
  GraphConfig graph;
  AlgorithmVariant algorithm = AlgorithmVariant::kDpWeakening;
  PolySchedule lambda = PolySchedule::Constant(0.0);
  PolySchedule gamma = PolySchedule::Constant(1.0);
  std::optional<PolySchedule> nu;
  OracleConfig oracle;
  PrivacyConfig privacy;
  RunConfig run;
  OutputConfig output;
  GeometricParams baseline;

  // The parsed document, re-serialized by CanonicalConfig.
  nlohmann::json document;
  std::filesystem::path base_directory;
  // Schedule and budget verdicts; failures are warnings, not errors.
  std::vector<std::string> checks;
  std::vector<std::string> warnings;
};

// Parses and validates a config document. Errors name the offending field;
// malformed JSON reports line and column.
absl::StatusOr<ExperimentConfig> ParseConfig(
    const std::string& text, const std::filesystem::path& base_directory = ".");
absl::StatusOr<ExperimentConfig> LoadConfig(const std::filesystem::path& path);

// Re-validates after programmatic edits (seed/iteration overrides) and
// refreshes `document`.
absl::Status ApplyOverrides(ExperimentConfig& config,
                            std::optional<int> seed_count,
                            std::optional<int64_t> iterations,
                            std::optional<std::filesystem::path> output);

// Stable serialization used for config.json and the config hash.
std::string CanonicalConfig(const ExperimentConfig& config);
std::string Sha256Hex(const std::string& bytes);

// Immutable values shared by every run of an experiment.
struct PreparedExperiment {
  CournotInstance instance;
  GameSpec game;
  Graph graph;
  WeightMatrix weights;
  DecisionProfile x_star;
  // Resolved Laplace scale; absent for noise-free runs.
  std::optional<PolySchedule> nu;
  // Infinite-horizon budget guarantee for the resolved schedules.
  double eps_guarantee = 0.0;
};

// Builds the instance and graph, computes x* once (or takes it from the
// instance file), and resolves ν. `match_eps` supplies the target for
// configs that ask for a matched budget.
absl::StatusOr<PreparedExperiment> Prepare(
    const ExperimentConfig& config,
    std::optional<double> match_eps = std::nullopt);

// 2C̄·Σ_{k>=first} λ^k/ν^k for the config's variant and ν.
absl::StatusOr<double> BudgetGuarantee(const ExperimentConfig& config,
                                       const PolySchedule& nu);

struct RunRecord {
  std::string run_id;
  uint64_t seed = 0;
  std::string config_hash;
  bool ok = false;
  std::string error;
  TrajectoryMetrics metrics;
  std::filesystem::path trajectory_path;
  std::filesystem::path ledger_path;

  double final_gap() const;
  double final_consensus_error() const;
  double final_conservation_residual() const;
  double final_eps() const;
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  double eps_guarantee = 0.0;
  bool all_ok() const;
};

struct ExecutionOptions {
  int jobs = 1;
  bool write_files = true;
};

// Runs every seed of `config` on a pool of `jobs` workers. Records come back
// in seed order; a failed run is recorded and the others continue.
absl::StatusOr<ExperimentResult> RunExperiment(
    const ExperimentConfig& config, const ExecutionOptions& execution = {},
    std::optional<double> match_eps = std::nullopt);

// Executes a single seed.
RunRecord ExecuteRun(const ExperimentConfig& config,
                     const PreparedExperiment& prepared, uint64_t seed,
                     const std::string& config_hash,
                     const ExecutionOptions& execution);

struct SummaryRow {
  int64_t k = 0;
  int runs = 0;
  double gap_mean = 0.0;
  double gap_median = 0.0;
  double gap_variance = 0.0;
  double consensus_mean = 0.0;
  double consensus_median = 0.0;
  double consensus_variance = 0.0;
  double eps_mean = 0.0;
};

struct SampleStats {
  double mean = 0.0;
  double median = 0.0;
  // Unbiased (n - 1); zero for a single sample.
  double variance = 0.0;
};

SampleStats ComputeStats(std::vector<double> values);

// Per-iteration statistics across the successful records, which must share
// their recorded iterations.
absl::StatusOr<std::vector<SummaryRow>> Summarize(
    const std::vector<RunRecord>& records);

void WriteSummaryCsv(const std::vector<SummaryRow>& rows, std::ostream& out);

// run_id,k,equilibrium_gap,consensus_error,conservation_residual,eps_spent
void WriteTrajectoryCsv(const std::string& run_id,
                        const TrajectoryMetrics& metrics, std::ostream& out);
absl::StatusOr<RunRecord> ReadTrajectoryCsv(std::istream& in);

// Loads every traj_*.csv in `directory`, sorted by file name.
absl::StatusOr<std::vector<RunRecord>> ReadTrajectoryDirectory(
    const std::filesystem::path& directory);

struct AlgorithmColumn {
  std::string label;
  AlgorithmVariant algorithm = AlgorithmVariant::kDpWeakening;
  std::vector<SummaryRow> summary;
  // Mean ε spent by the end of the runs and the infinite-horizon guarantee.
  double eps_spent = 0.0;
  double eps_guarantee = 0.0;
  double final_gap_median = 0.0;
  bool all_ok = false;
};

struct ComparisonTable {
  std::vector<int64_t> iterations;
  std::vector<AlgorithmColumn> columns;
};

// Configs must agree on game, graph, seeds, horizon and recording. A config
// with "eps_target": "match" receives the budget guarantee of the first
// config that fixes ν explicitly.
absl::StatusOr<ComparisonTable> CompareAlgorithms(
    const std::vector<ExperimentConfig>& configs,
    const ExecutionOptions& execution = {});

// k, then <label>_gap_mean, <label>_gap_median, <label>_gap_variance,
// <label>_consensus_median per algorithm.
void WriteComparisonCsv(const ComparisonTable& table, std::ostream& out);
// label,algorithm,eps_spent,eps_guarantee,final_gap_median
void WriteComparisonBudgetCsv(const ComparisonTable& table, std::ostream& out);

}  // namespace dpnash

#endif  // DPNASH_HARNESS_H_
