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

#ifndef DPNASH_COURNOT_H_
#define DPNASH_COURNOT_H_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "absl/status/statusor.h"
#include "dpnash/game_core.h"

namespace dpnash {

// Nash-Cournot market game. Firm i pays x_iᵀQ_i x_i + q_iᵀx_i and sells
// [x_i]_j at price P̄_j - χ_j·[Bx]_j in each market j it enters. Decisions
// live in R^N for every firm; markets a firm does not enter are pinned to
// zero by its box.
struct CournotInstance {
  int num_firms = 0;
  int num_markets = 0;
  // num_firms x num_markets, entries 0 or 1.
  Eigen::MatrixXi participation;
  std::vector<Vector> capacity;
  std::vector<Eigen::MatrixXd> quadratic_cost;
  std::vector<Vector> linear_cost;
  Vector price_intercept;
  // Diagonal of Ξ.
  Vector price_slope;

  bool participates(int firm, int market) const {
    return participation(firm, market) != 0;
  }
};

// Checks shapes, positive-definite Q_i, χ > 0, and that every firm and market
// has a partner.
absl::Status ValidateCournot(const CournotInstance& instance);

struct ParticipationSpec {
  // Explicit matrix; when absent a random one is drawn with `density`.
  std::optional<Eigen::MatrixXi> matrix;
  double density = 0.4;
};

struct CournotOptions {
  // Q_i = ν·I when false; otherwise Q_i = ν·I + G Gᵀ/N with G uniform [0, 1).
  bool general_quadratic_cost = false;
};

// Random instance. Participation comes from the stream
// MixSeed({seed, kInstance, 1}): each entry is 1 with probability `density`,
// then every empty firm row and empty market column gets one uniformly chosen
// partner. Parameters come from MixSeed({seed, kInstance, 0}) in this order:
// for each firm, N capacities U[8,10], ν U[1,10], N linear costs U[1,2]
// (and the G entries when enabled); then N intercepts U[10,20] and N slopes
// U[1,3].
absl::StatusOr<CournotInstance> BuildCournot(
    uint64_t seed, int num_firms, int num_markets,
    const ParticipationSpec& participation = {},
    const CournotOptions& options = {});

// m identical firms in a single market.
absl::StatusOr<CournotInstance> SymmetricCournot(int num_firms, double q_quad,
                                                 double q_lin, double chi,
                                                 double p_bar, double capacity);

// F_i(x_i, u) = 2Q_i x_i + q_i + B_iΞB_i x_i - B_i(P̄ - Ξ·m·u), where u is the
// average decision and m·u stands in for the total supply Bx.
absl::StatusOr<Vector> CournotPseudoGradient(const CournotInstance& instance,
                                             int firm, const Vector& own,
                                             const Vector& u);

// Payoff f_i(x_i, x) = c_i(x_i) - (P̄ - Ξ·Σ_j B_j x_j)ᵀ B_i x_i.
double CournotCost(const CournotInstance& instance, int firm,
                   const std::vector<Vector>& x);

// Boxes [0, C_i ⊙ participation_i], average-convention evaluators.
absl::StatusOr<GameSpec> ToGameSpec(const CournotInstance& instance);

struct CentralizedOptions {
  double tol = 1e-9;
  int64_t max_iters = 2000000;
  // Fixed step of the stopping residual ‖x - Π_K[x - α̂φ(x)]‖.
  double probe_step = 0.01;
  // α_k = 1/(alpha_offset + k).
  double alpha_offset = 10.0;
};

// Centralized projected pseudo-gradient iteration x ← Π_K[x - α_k φ(x)] with
// the exact average. ResourceExhausted (carrying the residual) when
// max_iters is reached.
absl::StatusOr<DecisionProfile> SolveCentralized(
    const GameSpec& game, const CentralizedOptions& options = {});

// ‖x - Π_K[x - step·φ(x)]‖.
absl::StatusOr<double> FixedPointResidual(const GameSpec& game,
                                          const DecisionProfile& x,
                                          double step);

struct SymmetricCournotParams {
  int num_firms = 1;
  double q_quad = 1.0;
  double q_lin = 0.0;
  double chi = 1.0;
  double p_bar = 10.0;
  double capacity = 10.0;
};

// (P̄ - q)/(2Q + χ + χm); OutOfRange when the root leaves [0, capacity].
absl::StatusOr<double> ClosedFormSymmetric(const SymmetricCournotParams& p);

struct CournotMonotonicityReport {
  bool pass = false;
  double min_eigenvalue = 0.0;
};

// Minimum eigenvalue of the symmetrized constant Jacobian of φ.
absl::StatusOr<CournotMonotonicityReport> VerifyMonotonicityCournot(
    const CournotInstance& instance);

Eigen::MatrixXd CournotJacobian(const CournotInstance& instance);

nlohmann::json InstanceToJson(const CournotInstance& instance,
                              const DecisionProfile* x_star = nullptr);

struct LoadedInstance {
  CournotInstance instance;
  std::optional<DecisionProfile> x_star;
};

absl::StatusOr<LoadedInstance> InstanceFromJson(const nlohmann::json& json);

}  // namespace dpnash

#endif  // DPNASH_COURNOT_H_
