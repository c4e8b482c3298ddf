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

#ifndef DPNASH_GAME_CORE_H_
#define DPNASH_GAME_CORE_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dpnash/random.h"

namespace dpnash {

using Vector = Eigen::VectorXd;

// Axis-aligned box [lower, upper] in R^d. Bounds are finite and ordered.
class FeasibleBox {
 public:
  static absl::StatusOr<FeasibleBox> Create(Vector lower, Vector upper);
  // Box [lo, hi]^d.
  static absl::StatusOr<FeasibleBox> Uniform(int dimension, double lo,
                                             double hi);

  int dimension() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  bool Contains(const Vector& point, double slack = 0.0) const;

  friend bool operator==(const FeasibleBox& a, const FeasibleBox& b) {
    return a.lower_ == b.lower_ && a.upper_ == b.upper_;
  }

 private:
  FeasibleBox(Vector lower, Vector upper)
      : lower_(std::move(lower)), upper_(std::move(upper)) {}

  Vector lower_;
  Vector upper_;
};

// F_i(x_i, u): gradient of player i's cost in its own decision, given the
// aggregate argument u. Evaluators must be re-entrant.
struct PseudoGradientField {
  using Evaluator = std::function<Vector(const Vector& own, const Vector& u)>;

  int dimension = 0;
  Evaluator evaluate;
};

enum class AggregateConvention {
  // Evaluators receive the average decision x̄.
  kAverage,
  // Evaluators receive the aggregate m·x̄.
  kSum,
};

struct Player {
  FeasibleBox box;
  PseudoGradientField field;
};

class GameSpec {
 public:
  static absl::StatusOr<GameSpec> Create(
      std::vector<Player> players,
      AggregateConvention convention = AggregateConvention::kAverage);

  int num_players() const { return static_cast<int>(players_->size()); }
  int dimension() const { return dimension_; }
  AggregateConvention convention() const { return convention_; }
  const Player& player(int i) const { return (*players_)[i]; }
  const std::vector<Player>& players() const { return *players_; }

  // The argument handed to evaluators when the players' average decision is
  // `average`.
  Vector AggregateArgument(const Vector& average) const;

 private:
  GameSpec(std::shared_ptr<const std::vector<Player>> players, int dimension,
           AggregateConvention convention)
      : players_(std::move(players)),
        dimension_(dimension),
        convention_(convention) {}

  std::shared_ptr<const std::vector<Player>> players_;
  int dimension_;
  AggregateConvention convention_;
};

// Stacked profile x = [x_1; ...; x_m].
class DecisionProfile {
 public:
  DecisionProfile() = default;
  DecisionProfile(Vector stacked, int dimension)
      : stacked_(std::move(stacked)), dimension_(dimension) {}
  static DecisionProfile FromBlocks(const std::vector<Vector>& blocks);

  const Vector& stacked() const { return stacked_; }
  int dimension() const { return dimension_; }
  int num_players() const {
    return dimension_ == 0 ? 0 : static_cast<int>(stacked_.size()) / dimension_;
  }
  Eigen::VectorBlock<const Vector> block(int i) const {
    return stacked_.segment(static_cast<Eigen::Index>(i) * dimension_,
                            dimension_);
  }
  std::vector<Vector> Blocks() const;
  Vector Average() const;

 private:
  Vector stacked_;
  int dimension_ = 0;
};

// Euclidean projection onto the box (coordinate-wise clamp).
absl::StatusOr<Vector> Project(const FeasibleBox& box, const Vector& point);

// Unchecked projection for hot loops; dimensions must already agree.
Vector ProjectUnchecked(const FeasibleBox& box, const Vector& point);

// φ(x) = F(x, x̄), evaluated in player order.
absl::StatusOr<Vector> EvaluatePhi(const GameSpec& game,
                                   const DecisionProfile& x);

// Draws a profile uniformly from K = K_1 × ... × K_m.
DecisionProfile SampleUniformProfile(const GameSpec& game,
                                     RandomEngine& engine);

struct MonotonicityReport {
  bool pass = false;
  // min over sampled pairs of (φ(x)-φ(x'))ᵀ(x-x') / ‖x-x'‖².
  double worst_normalized_inner_product = 0.0;
  int pairs_tested = 0;
};

inline constexpr double kDefaultMonotonicityTol = 1e-12;

// Sampling probe of strict monotonicity of φ over K. Not a proof.
absl::StatusOr<MonotonicityReport> CheckStrictMonotonicity(
    const GameSpec& game, uint64_t seed, int pair_count,
    double tol = kDefaultMonotonicityTol);

// Lower bound on the Lipschitz constant of F_i in its aggregate argument,
// from samples x_i ∈ K_i and u_1 ≠ u_2 drawn from the averaged box K̄.
absl::StatusOr<double> EstimateLipschitz(const GameSpec& game, uint64_t seed,
                                         int sample_count);

}  // namespace dpnash

#endif  // DPNASH_GAME_CORE_H_
