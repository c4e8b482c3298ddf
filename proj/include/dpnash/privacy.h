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

#ifndef DPNASH_PRIVACY_H_
#define DPNASH_PRIVACY_H_

#include <cstdint>
#include <ostream>
#include <vector>

#include "absl/status/statusor.h"
#include "dpnash/game_core.h"
#include "dpnash/random.h"
#include "dpnash/schedules.h"
#include "dpnash/solver_state.h"

namespace dpnash {

// One Lap(ν) draw by inverse CDF: -ν·sign(u)·ln(1 - 2|u|), u ~ U(-1/2, 1/2).
double SampleLaplaceScalar(double nu, RandomEngine& stream);

// `dimension` independent Lap(ν) draws.
Vector SampleLaplace(double nu, int dimension, RandomEngine& stream);

// Per-player Laplace noise ζ_i^k with scale ν^k. Player i draws from the
// stream MixSeed({master_seed, run_seed, kPrivacyNoise, i}) and consumes
// exactly `dimension` values per iteration, so ζ_i^k is a pure function of
// (master_seed, run_seed, i, k) given the iteration order.
class LaplaceNoiseSource {
 public:
  LaplaceNoiseSource(PolySchedule nu, int dimension, int num_players,
                     uint64_t master_seed, uint64_t run_seed);

  const PolySchedule& nu() const { return nu_; }
  int dimension() const { return dimension_; }

  // ζ^k for every player.
  std::vector<Vector> Draw(int64_t k);

 private:
  PolySchedule nu_;
  int dimension_;
  std::vector<RandomEngine> streams_;
};

// Δ^k <= 2·λ^k·C̄.
absl::StatusOr<double> SensitivityBound(double lambda_k, double c_bar);

struct BudgetReport {
  // Σ_{k=start}^{horizon} 2C̄λ^k/ν^k.
  double partial = 0.0;
  // Upper bound on Σ_{k>horizon}; +inf when the series is not summable.
  double tail_bound = 0.0;
  bool finite = false;
  DecidedBy decided_by = DecidedBy::kExponentRule;
};

// The tail bound integrates the power-law envelope of λ/ν beyond the
// horizon, so partial + tail_bound is a guaranteed upper bound on the total.
absl::StatusOr<BudgetReport> CumulativeBudget(const PolySchedule& lambda,
                                              const PolySchedule& nu,
                                              double c_bar, int64_t horizon,
                                              int64_t start_index = 1);

// Φ = Σ_{k>=start} λ^k/ν'^k to absolute accuracy ~1e-9: direct summation
// until the term drops below 1e-12 (or 10^5 terms), then the midpoint
// integral ∫_{K+1/2}^∞ λ(t)/ν'(t) dt for the remainder.
absl::StatusOr<double> RatioSeriesSum(const PolySchedule& lambda,
                                      const PolySchedule& nu_prime,
                                      int64_t start_index = 1);

struct NoiseCalibration {
  PolySchedule nu;
  double phi = 0.0;
  // ν = scale · ν', scale = 2C̄Φ/ε.
  double scale = 0.0;
};

absl::StatusOr<NoiseCalibration> CalibrateNoise(const PolySchedule& lambda,
                                                const PolySchedule& nu_prime,
                                                double eps_target,
                                                double c_bar,
                                                int64_t start_index = 1);

// Constant ν for λ^k = λ0·q^k (k >= 0) such that Σ 2C̄λ^k/ν = ε exactly:
// ν = 2C̄λ0 / ((1 - q)·ε).
absl::StatusOr<double> GeometricNoiseScale(double lambda0, double q,
                                           double eps_target, double c_bar);

// Per-iteration privacy accounting of one run.
class PrivacyLedger {
 public:
  struct Entry {
    int64_t k = 0;
    double lambda = 0.0;
    double nu = 0.0;
    double delta = 0.0;      // 2·λ·C̄
    double increment = 0.0;  // delta / ν
    double cumulative_eps = 0.0;
  };

  explicit PrivacyLedger(double c_bar) : c_bar_(c_bar) {}

  void Record(int64_t k, double lambda_k, double nu_k);

  double c_bar() const { return c_bar_; }
  double cumulative_eps() const {
    return entries_.empty() ? 0.0 : entries_.back().cumulative_eps;
  }
  const std::vector<Entry>& entries() const { return entries_; }

  // Bound on the budget of all iterations after the last recorded one.
  double tail_bound() const { return tail_bound_; }
  void set_tail_bound(double bound) { tail_bound_ = bound; }

  // Columns: k, lambda, nu, delta, increment, cumulative_eps.
  void WriteCsv(std::ostream& out) const;

 private:
  double c_bar_;
  double tail_bound_ = 0.0;
  std::vector<Entry> entries_;
};

// Scales g onto the ℓ1 ball of radius c_bar when it lies outside.
Vector ClipL1(const Vector& g, double c_bar);

struct SensitivityProbeResult {
  // ‖x_a^{k+1} - x_b^{k+1}‖₁ over the stacked decisions.
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
};

// Runs one decision update from `state` under two adjacent games (identical
// boxes, fields differing only for `differing_player`) with every
// pseudo-gradient clipped to ℓ1 norm c_bar, and compares the outcome with
// the 2λC̄ sensitivity bound.
absl::StatusOr<SensitivityProbeResult> OneStepSensitivityProbe(
    const GameSpec& game_a, const GameSpec& game_b, int differing_player,
    const SolverState& state, double lambda_k, double c_bar);

}  // namespace dpnash

#endif  // DPNASH_PRIVACY_H_
