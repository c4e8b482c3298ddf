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

#ifndef DPNASH_SOLVER_H_
#define DPNASH_SOLVER_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dpnash/game_core.h"
#include "dpnash/network.h"
#include "dpnash/privacy.h"
#include "dpnash/random.h"
#include "dpnash/schedules.h"
#include "dpnash/solver_state.h"

namespace dpnash {

enum class AlgorithmVariant {
  // Weakening coupling γ^k with decaying step λ^k.
  kDpWeakening,
  // γ^k ≡ 1, same λ^k and noise.
  kBaselineFixed,
  // γ^k ≡ 1, λ^k = λ0·q^k.
  kBaselineGeometric,
};

const char* VariantName(AlgorithmVariant variant);
absl::StatusOr<AlgorithmVariant> ParseVariant(const std::string& name);

// Pseudo-gradient access for the solver. Additive mode adds zero-mean
// Gaussian noise with per-coordinate variance (μ^k)²/d, drawn from a
// per-player stream that consumes d values per evaluation.
class GradientOracle {
 public:
  enum class Mode { kExact, kAdditiveNoise };

  static GradientOracle Exact();
  static GradientOracle AdditiveGaussian(PolySchedule mu, int num_players,
                                         uint64_t master_seed,
                                         uint64_t run_seed);

  Mode mode() const { return mode_; }
  const std::optional<PolySchedule>& mu() const { return mu_; }

  // F_i(own, u) (+ η_i^k). Non-finite results are reported as OutOfRange.
  absl::StatusOr<Vector> Evaluate(const GameSpec& game, int player,
                                  const Vector& own, const Vector& u,
                                  int64_t k);

 private:
  GradientOracle() = default;

  Mode mode_ = Mode::kExact;
  std::optional<PolySchedule> mu_;
  std::vector<RandomEngine> streams_;
};

// One synchronous round from `state` at schedule index state.k:
//   x_i⁺ = Π_Ki[x_i - λ·F_i(x_i, v_i)]
//   v_i⁺ = v_i + γ·Σ_j L_ij((v_j + ζ_j) - (v_i + ζ_i)) + x_i⁺ - x_i
// An empty `noise` means ζ ≡ 0. The result carries k + 1.
absl::StatusOr<SolverState> Step(const SolverState& state, const GameSpec& game,
                                 const WeightMatrix& weights, double lambda_k,
                                 double gamma_k,
                                 const std::vector<Vector>& noise,
                                 GradientOracle& oracle);

// Step with γ ≡ 1.
absl::StatusOr<SolverState> BaselineStepFixed(const SolverState& state,
                                              const GameSpec& game,
                                              const WeightMatrix& weights,
                                              double lambda_k,
                                              const std::vector<Vector>& noise,
                                              GradientOracle& oracle);

// Step with γ ≡ 1 and λ = lambda0·q^k.
absl::StatusOr<SolverState> BaselineStepGeometric(
    const SolverState& state, const GameSpec& game,
    const WeightMatrix& weights, double lambda0, double q, int64_t k,
    const std::vector<Vector>& noise, GradientOracle& oracle);

// Σ_i ‖v_i - v̄‖².
double ConsensusError(const SolverState& state);

// ‖Σ_i v_i - Σ_i x_i‖.
double ConservationResidual(const SolverState& state);

// ‖Σ_i x_i‖, the scale of the conservation tolerance.
double AggregateNorm(const SolverState& state);

struct TrajectoryMetrics {
  // Completed steps at each record.
  std::vector<int64_t> recorded_iterations;
  // ‖x - x*‖ (NaN without a reference).
  std::vector<double> equilibrium_gap;
  std::vector<double> consensus_error;
  std::vector<double> conservation_residual;
  // ‖Σx‖ at each record.
  std::vector<double> aggregate_norm;
  std::vector<double> eps_spent;
  std::vector<std::string> warnings;

  size_t size() const { return recorded_iterations.size(); }
};

struct GeometricParams {
  double lambda0 = 0.1;
  double q = 0.995;
};

struct RunOptions {
  AlgorithmVariant variant = AlgorithmVariant::kDpWeakening;
  int64_t iterations = 0;
  int64_t record_every = 100;
  // Schedule index of the first step.
  int64_t first_index = 0;
  uint64_t master_seed = 0;
  uint64_t run_seed = 0;
  GeometricParams geometric;
};

struct RunResult {
  TrajectoryMetrics metrics;
  SolverState final_state;
};

// Initializes x_i⁰ uniformly in K_i and v_i⁰ = x_i⁰, then runs
// `options.iterations` steps of the chosen variant. Records at step 0, every
// record_every steps and after the last step. `noise_source`, `x_star` and
// `ledger` are optional; a ledger needs a noise source.
absl::StatusOr<RunResult> Run(const GameSpec& game, const WeightMatrix& weights,
                              const PolySchedule& lambda,
                              const PolySchedule& gamma,
                              LaplaceNoiseSource* noise_source,
                              GradientOracle& oracle,
                              const RunOptions& options,
                              const DecisionProfile* x_star,
                              PrivacyLedger* ledger);

}  // namespace dpnash

#endif  // DPNASH_SOLVER_H_
