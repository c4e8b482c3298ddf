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

#include "dpnash/solver.h"

#include <cmath>
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"

namespace dpnash {

const char* VariantName(AlgorithmVariant variant) {
  switch (variant) {
    case AlgorithmVariant::kDpWeakening:
      return "dp_weakening";
    case AlgorithmVariant::kBaselineFixed:
      return "baseline_fixed";
    case AlgorithmVariant::kBaselineGeometric:
      return "baseline_geometric";
  }
  return "unknown";
}

absl::StatusOr<AlgorithmVariant> ParseVariant(const std::string& name) {
  for (AlgorithmVariant v :
       {AlgorithmVariant::kDpWeakening, AlgorithmVariant::kBaselineFixed,
        AlgorithmVariant::kBaselineGeometric}) {
    if (name == VariantName(v)) return v;
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown algorithm '", name,
      "' (expected dp_weakening, baseline_fixed or baseline_geometric)"));
}

GradientOracle GradientOracle::Exact() { return GradientOracle(); }

GradientOracle GradientOracle::AdditiveGaussian(PolySchedule mu,
                                                int num_players,
                                                uint64_t master_seed,
                                                uint64_t run_seed) {
  GradientOracle oracle;
  oracle.mode_ = Mode::kAdditiveNoise;
  oracle.mu_ = std::move(mu);
  oracle.streams_.reserve(num_players);
  for (int i = 0; i < num_players; ++i) {
    oracle.streams_.push_back(MakeStream({master_seed, run_seed,
                                          ChannelId(StreamChannel::kOracleNoise),
                                          static_cast<uint64_t>(i)}));
  }
  return oracle;
}

absl::StatusOr<Vector> GradientOracle::Evaluate(const GameSpec& game,
                                                int player, const Vector& own,
                                                const Vector& u, int64_t k) {
  Vector g = game.player(player).field.evaluate(own, u);
  if (g.size() != own.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "pseudo-gradient of player ", player, " has dimension ", g.size(),
        ", expected ", own.size()));
  }
  if (mode_ == Mode::kAdditiveNoise) {
    if (player >= static_cast<int>(streams_.size())) {
      return absl::InvalidArgumentError(
          absl::StrCat("oracle has no stream for player ", player));
    }
    const double stddev =
        (*mu_)(k) / std::sqrt(static_cast<double>(g.size()));
    std::normal_distribution<double> normal(0.0, stddev);
    RandomEngine& stream = streams_[player];
    for (Eigen::Index j = 0; j < g.size(); ++j) g[j] += normal(stream);
  }
  if (!g.allFinite()) {
    return absl::OutOfRangeError(
        absl::StrCat("numerical error: non-finite pseudo-gradient for player ",
                     player, " at iteration ", k));
  }
  return g;
}

namespace {

absl::Status CheckStepInputs(const SolverState& state, const GameSpec& game,
                             const WeightMatrix& weights,
                             const std::vector<Vector>& noise) {
  const int m = game.num_players();
  const int d = game.dimension();
  if (state.num_players() != m || static_cast<int>(state.v.size()) != m) {
    return absl::InvalidArgumentError(
        absl::StrCat("state holds ", state.num_players(), " players, game has ",
                     m));
  }
  if (weights.size() != m) {
    return absl::InvalidArgumentError(absl::StrCat(
        "weight matrix is ", weights.size(), "x", weights.size(),
        ", game has ", m, " players"));
  }
  if (!noise.empty() && static_cast<int>(noise.size()) != m) {
    return absl::InvalidArgumentError("noise must hold one vector per player");
  }
  for (int i = 0; i < m; ++i) {
    if (state.x[i].size() != d || state.v[i].size() != d ||
        (!noise.empty() && noise[i].size() != d)) {
      return absl::InvalidArgumentError(
          absl::StrCat("dimension mismatch for player ", i));
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<SolverState> Step(const SolverState& state, const GameSpec& game,
                                 const WeightMatrix& weights, double lambda_k,
                                 double gamma_k,
                                 const std::vector<Vector>& noise,
                                 GradientOracle& oracle) {
  if (auto s = CheckStepInputs(state, game, weights, noise); !s.ok()) return s;
  const int m = game.num_players();

  std::vector<Vector> shared(state.v);
  if (!noise.empty()) {
    for (int i = 0; i < m; ++i) shared[i] += noise[i];
  }

  SolverState next;
  next.k = state.k + 1;
  next.x.reserve(m);
  next.v.reserve(m);
  for (int i = 0; i < m; ++i) {
    absl::StatusOr<Vector> g = oracle.Evaluate(
        game, i, state.x[i], game.AggregateArgument(state.v[i]), state.k);
    if (!g.ok()) return g.status();
    Vector x_next = ProjectUnchecked(game.player(i).box,
                                     state.x[i] - lambda_k * *g);
    Vector coupling = Vector::Zero(game.dimension());
    for (const WeightMatrix::Neighbor& nb : weights.neighbors(i)) {
      coupling += nb.weight * (shared[nb.index] - shared[i]);
    }
    Vector v_next = state.v[i] + gamma_k * coupling + (x_next - state.x[i]);
    if (!v_next.allFinite()) {
      return absl::OutOfRangeError(absl::StrCat(
          "numerical error: non-finite estimate for player ", i,
          " at iteration ", state.k));
    }
    next.x.push_back(std::move(x_next));
    next.v.push_back(std::move(v_next));
  }
  return next;
}

absl::StatusOr<SolverState> BaselineStepFixed(const SolverState& state,
                                              const GameSpec& game,
                                              const WeightMatrix& weights,
                                              double lambda_k,
                                              const std::vector<Vector>& noise,
                                              GradientOracle& oracle) {
  return Step(state, game, weights, lambda_k, 1.0, noise, oracle);
}

absl::StatusOr<SolverState> BaselineStepGeometric(
    const SolverState& state, const GameSpec& game,
    const WeightMatrix& weights, double lambda0, double q, int64_t k,
    const std::vector<Vector>& noise, GradientOracle& oracle) {
  if (!(q > 0.0 && q < 1.0)) {
    return absl::InvalidArgumentError("geometric ratio q must lie in (0, 1)");
  }
  if (!(lambda0 >= 0.0)) {
    return absl::InvalidArgumentError("lambda0 must be non-negative");
  }
  const double lambda_k = lambda0 * std::pow(q, static_cast<double>(k));
  return Step(state, game, weights, lambda_k, 1.0, noise, oracle);
}

double ConsensusError(const SolverState& state) {
  if (state.v.empty()) return 0.0;
  Vector mean = Vector::Zero(state.v.front().size());
  for (const Vector& v : state.v) mean += v;
  mean /= static_cast<double>(state.v.size());
  double total = 0.0;
  for (const Vector& v : state.v) total += (v - mean).squaredNorm();
  return total;
}

double ConservationResidual(const SolverState& state) {
  if (state.v.empty()) return 0.0;
  Vector sum_v = Vector::Zero(state.v.front().size());
  Vector sum_x = Vector::Zero(sum_v.size());
  for (const Vector& v : state.v) sum_v += v;
  for (const Vector& x : state.x) sum_x += x;
  return (sum_v - sum_x).norm();
}

double AggregateNorm(const SolverState& state) {
  if (state.x.empty()) return 0.0;
  Vector sum = Vector::Zero(state.x.front().size());
  for (const Vector& x : state.x) sum += x;
  return sum.norm();
}

namespace {

double EquilibriumGap(const SolverState& state, const DecisionProfile* x_star) {
  if (x_star == nullptr) return std::numeric_limits<double>::quiet_NaN();
  return (DecisionProfile::FromBlocks(state.x).stacked() - x_star->stacked())
      .norm();
}

void Record(const SolverState& state, int64_t completed,
            const DecisionProfile* x_star, const PrivacyLedger* ledger,
            TrajectoryMetrics& metrics) {
  metrics.recorded_iterations.push_back(completed);
  metrics.equilibrium_gap.push_back(EquilibriumGap(state, x_star));
  metrics.consensus_error.push_back(ConsensusError(state));
  metrics.conservation_residual.push_back(ConservationResidual(state));
  metrics.aggregate_norm.push_back(AggregateNorm(state));
  metrics.eps_spent.push_back(ledger == nullptr ? 0.0
                                                : ledger->cumulative_eps());
}

double LedgerTail(AlgorithmVariant variant, const PolySchedule& lambda,
                  const LaplaceNoiseSource& noise, const RunOptions& options,
                  double c_bar, int64_t last_k) {
  if (variant == AlgorithmVariant::kBaselineGeometric) {
    const double q = options.geometric.q;
    return 2.0 * c_bar * options.geometric.lambda0 *
           std::pow(q, static_cast<double>(last_k + 1)) /
           ((1.0 - q) * noise.nu()(last_k + 1));
  }
  absl::StatusOr<BudgetReport> budget = CumulativeBudget(
      lambda, noise.nu(), c_bar, std::max<int64_t>(last_k, 1),
      std::max<int64_t>(last_k, 1));
  if (!budget.ok()) return std::numeric_limits<double>::infinity();
  return budget->tail_bound;
}

}  // namespace

absl::StatusOr<RunResult> Run(const GameSpec& game, const WeightMatrix& weights,
                              const PolySchedule& lambda,
                              const PolySchedule& gamma,
                              LaplaceNoiseSource* noise_source,
                              GradientOracle& oracle,
                              const RunOptions& options,
                              const DecisionProfile* x_star,
                              PrivacyLedger* ledger) {
  const int m = game.num_players();
  const int d = game.dimension();
  if (weights.size() != m) {
    return absl::InvalidArgumentError(absl::StrCat(
        "weight matrix is ", weights.size(), "x", weights.size(),
        ", game has ", m, " players"));
  }
  if (options.iterations < 0 || options.record_every < 1) {
    return absl::InvalidArgumentError(
        "iterations must be >= 0 and record_every >= 1");
  }
  if (x_star != nullptr &&
      (x_star->dimension() != d || x_star->num_players() != m)) {
    return absl::InvalidArgumentError(
        "reference equilibrium does not match the game dimensions");
  }
  if (noise_source != nullptr && noise_source->dimension() != d) {
    return absl::InvalidArgumentError("noise dimension does not match the game");
  }
  if (ledger != nullptr && noise_source == nullptr) {
    return absl::InvalidArgumentError(
        "a privacy ledger requires a Laplace noise source");
  }
  const bool geometric =
      options.variant == AlgorithmVariant::kBaselineGeometric;
  if (geometric) {
    if (!(options.geometric.q > 0.0 && options.geometric.q < 1.0) ||
        !(options.geometric.lambda0 >= 0.0)) {
      return absl::InvalidArgumentError(
          "geometric baseline needs lambda0 >= 0 and q in (0, 1)");
    }
  } else if (options.first_index < lambda.first_index() ||
             (options.variant == AlgorithmVariant::kDpWeakening &&
              options.first_index < gamma.first_index())) {
    return absl::InvalidArgumentError(absl::StrCat(
        "schedules are undefined at the first index ", options.first_index));
  }
  if (noise_source != nullptr &&
      options.first_index < noise_source->nu().first_index()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "noise schedule is undefined at the first index ", options.first_index));
  }

  RunResult result;
  TrajectoryMetrics& metrics = result.metrics;
  if (options.variant == AlgorithmVariant::kDpWeakening) {
    ConditionReport report = CheckConvergenceConditions(lambda, gamma);
    if (!report.all_pass()) {
      metrics.warnings.push_back(absl::StrCat(
          "step-size conditions violated: ", report.FailureSummary()));
    }
  }

  RandomEngine init = MakeStream({options.master_seed, options.run_seed,
                                  ChannelId(StreamChannel::kInitialization)});
  SolverState state;
  state.x = SampleUniformProfile(game, init).Blocks();
  state.v = state.x;
  state.k = options.first_index;

  Record(state, 0, x_star, ledger, metrics);
  std::vector<Vector> noise;
  for (int64_t t = 1; t <= options.iterations; ++t) {
    const int64_t k = state.k;
    if (noise_source != nullptr) noise = noise_source->Draw(k);
    absl::StatusOr<SolverState> next;
    double lambda_k = 0.0;
    switch (options.variant) {
      case AlgorithmVariant::kDpWeakening:
        lambda_k = lambda(k);
        next = Step(state, game, weights, lambda_k, gamma(k), noise, oracle);
        break;
      case AlgorithmVariant::kBaselineFixed:
        lambda_k = lambda(k);
        next = BaselineStepFixed(state, game, weights, lambda_k, noise, oracle);
        break;
      case AlgorithmVariant::kBaselineGeometric:
        lambda_k = options.geometric.lambda0 *
                   std::pow(options.geometric.q, static_cast<double>(k));
        next = BaselineStepGeometric(state, game, weights,
                                     options.geometric.lambda0,
                                     options.geometric.q, k, noise, oracle);
        break;
    }
    if (!next.ok()) return next.status();
    state = *std::move(next);
    if (ledger != nullptr) ledger->Record(k, lambda_k, noise_source->nu()(k));
    if (t % options.record_every == 0 || t == options.iterations) {
      Record(state, t, x_star, ledger, metrics);
    }
  }
  if (ledger != nullptr && options.iterations > 0) {
    ledger->set_tail_bound(LedgerTail(options.variant, lambda, *noise_source,
                                      options, ledger->c_bar(), state.k - 1));
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace dpnash
