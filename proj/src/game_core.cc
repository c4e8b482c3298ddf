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

#include "dpnash/game_core.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"

namespace dpnash {

absl::StatusOr<FeasibleBox> FeasibleBox::Create(Vector lower, Vector upper) {
  if (lower.size() != upper.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("box bounds have different lengths: ", lower.size(),
                     " vs ", upper.size()));
  }
  if (lower.size() == 0) {
    return absl::InvalidArgumentError("box must have dimension >= 1");
  }
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) {
      return absl::InvalidArgumentError(
          absl::StrCat("box bound ", j, " is not finite"));
    }
    if (lower[j] > upper[j]) {
      return absl::InvalidArgumentError(absl::StrCat(
          "box coordinate ", j, " has lower ", lower[j], " > upper ",
          upper[j]));
    }
  }
  return FeasibleBox(std::move(lower), std::move(upper));
}

absl::StatusOr<FeasibleBox> FeasibleBox::Uniform(int dimension, double lo,
                                                 double hi) {
  if (dimension < 1) {
    return absl::InvalidArgumentError("box must have dimension >= 1");
  }
  return Create(Vector::Constant(dimension, lo), Vector::Constant(dimension, hi));
}

bool FeasibleBox::Contains(const Vector& point, double slack) const {
  if (point.size() != lower_.size()) return false;
  for (Eigen::Index j = 0; j < point.size(); ++j) {
    if (point[j] < lower_[j] - slack || point[j] > upper_[j] + slack) {
      return false;
    }
  }
  return true;
}

absl::StatusOr<GameSpec> GameSpec::Create(std::vector<Player> players,
                                          AggregateConvention convention) {
  if (players.empty()) {
    return absl::InvalidArgumentError("a game needs at least one player");
  }
  const int d = players.front().box.dimension();
  for (size_t i = 0; i < players.size(); ++i) {
    const Player& p = players[i];
    if (p.box.dimension() != d || p.field.dimension != d) {
      return absl::InvalidArgumentError(absl::StrCat(
          "player ", i, " has dimension (box ", p.box.dimension(), ", field ",
          p.field.dimension, "), expected ", d));
    }
    if (!p.field.evaluate) {
      return absl::InvalidArgumentError(
          absl::StrCat("player ", i, " has no pseudo-gradient evaluator"));
    }
  }
  return GameSpec(
      std::make_shared<const std::vector<Player>>(std::move(players)), d,
      convention);
}

Vector GameSpec::AggregateArgument(const Vector& average) const {
  if (convention_ == AggregateConvention::kSum) {
    return static_cast<double>(num_players()) * average;
  }
  return average;
}

DecisionProfile DecisionProfile::FromBlocks(const std::vector<Vector>& blocks) {
  if (blocks.empty()) return DecisionProfile();
  const int d = static_cast<int>(blocks.front().size());
  Vector stacked(static_cast<Eigen::Index>(blocks.size()) * d);
  for (size_t i = 0; i < blocks.size(); ++i) {
    stacked.segment(static_cast<Eigen::Index>(i) * d, d) = blocks[i];
  }
  return DecisionProfile(std::move(stacked), d);
}

std::vector<Vector> DecisionProfile::Blocks() const {
  std::vector<Vector> blocks;
  blocks.reserve(num_players());
  for (int i = 0; i < num_players(); ++i) blocks.emplace_back(block(i));
  return blocks;
}

Vector DecisionProfile::Average() const {
  Vector sum = Vector::Zero(dimension_);
  for (int i = 0; i < num_players(); ++i) sum += block(i);
  return sum / static_cast<double>(num_players());
}

absl::StatusOr<Vector> Project(const FeasibleBox& box, const Vector& point) {
  if (point.size() != box.dimension()) {
    return absl::InvalidArgumentError(
        absl::StrCat("cannot project a point of length ", point.size(),
                     " onto a box of dimension ", box.dimension()));
  }
  return ProjectUnchecked(box, point);
}

Vector ProjectUnchecked(const FeasibleBox& box, const Vector& point) {
  return point.cwiseMax(box.lower()).cwiseMin(box.upper());
}

absl::StatusOr<Vector> EvaluatePhi(const GameSpec& game,
                                   const DecisionProfile& x) {
  const int m = game.num_players();
  const int d = game.dimension();
  if (x.dimension() != d ||
      x.stacked().size() != static_cast<Eigen::Index>(m) * d) {
    return absl::InvalidArgumentError(absl::StrCat(
        "profile has length ", x.stacked().size(), ", expected ", m * d));
  }
  const Vector u = game.AggregateArgument(x.Average());
  Vector phi(static_cast<Eigen::Index>(m) * d);
  for (int i = 0; i < m; ++i) {
    Vector fi = game.player(i).field.evaluate(Vector(x.block(i)), u);
    if (fi.size() != d) {
      return absl::InvalidArgumentError(absl::StrCat(
          "evaluator of player ", i, " returned length ", fi.size()));
    }
    if (!fi.allFinite()) {
      return absl::OutOfRangeError(absl::StrCat(
          "pseudo-gradient of player ", i, " is not finite"));
    }
    phi.segment(static_cast<Eigen::Index>(i) * d, d) = fi;
  }
  return phi;
}

DecisionProfile SampleUniformProfile(const GameSpec& game,
                                     RandomEngine& engine) {
  const int d = game.dimension();
  const int m = game.num_players();
  Vector stacked(static_cast<Eigen::Index>(m) * d);
  for (int i = 0; i < m; ++i) {
    const FeasibleBox& box = game.player(i).box;
    for (int j = 0; j < d; ++j) {
      stacked[static_cast<Eigen::Index>(i) * d + j] =
          box.lower()[j] +
          UniformUnit(engine) * (box.upper()[j] - box.lower()[j]);
    }
  }
  return DecisionProfile(std::move(stacked), d);
}

namespace {

bool IsSinglePoint(const GameSpec& game) {
  for (const Player& p : game.players()) {
    if ((p.box.upper() - p.box.lower()).maxCoeff() > 0.0) return false;
  }
  return true;
}

}  // namespace

absl::StatusOr<MonotonicityReport> CheckStrictMonotonicity(
    const GameSpec& game, uint64_t seed, int pair_count, double tol) {
  if (pair_count < 1) {
    return absl::InvalidArgumentError("pair_count must be >= 1");
  }
  if (IsSinglePoint(game)) {
    return absl::FailedPreconditionError(
        "feasible set is a single point; no distinct pairs exist");
  }
  RandomEngine engine = MakeStream({seed, ChannelId(StreamChannel::kProbe)});
  MonotonicityReport report;
  report.worst_normalized_inner_product =
      std::numeric_limits<double>::infinity();
  while (report.pairs_tested < pair_count) {
    const DecisionProfile x = SampleUniformProfile(game, engine);
    const DecisionProfile y = SampleUniformProfile(game, engine);
    const Vector diff = x.stacked() - y.stacked();
    const double norm_sq = diff.squaredNorm();
    if (norm_sq == 0.0) continue;
    absl::StatusOr<Vector> phi_x = EvaluatePhi(game, x);
    if (!phi_x.ok()) return phi_x.status();
    absl::StatusOr<Vector> phi_y = EvaluatePhi(game, y);
    if (!phi_y.ok()) return phi_y.status();
    const double normalized = (*phi_x - *phi_y).dot(diff) / norm_sq;
    report.worst_normalized_inner_product =
        std::min(report.worst_normalized_inner_product, normalized);
    ++report.pairs_tested;
  }
  report.pass = report.worst_normalized_inner_product > tol;
  return report;
}

absl::StatusOr<double> EstimateLipschitz(const GameSpec& game, uint64_t seed,
                                         int sample_count) {
  if (sample_count < 2) {
    return absl::InvalidArgumentError("sample_count must be >= 2");
  }
  const int m = game.num_players();
  const int d = game.dimension();
  Vector avg_lower = Vector::Zero(d);
  Vector avg_upper = Vector::Zero(d);
  for (const Player& p : game.players()) {
    avg_lower += p.box.lower();
    avg_upper += p.box.upper();
  }
  avg_lower /= m;
  avg_upper /= m;
  if ((avg_upper - avg_lower).maxCoeff() <= 0.0) {
    return absl::FailedPreconditionError(
        "averaged box is a single point; u_1 != u_2 cannot be sampled");
  }
  auto sample_box = [](const Vector& lo, const Vector& hi,
                       RandomEngine& engine) {
    Vector out(lo.size());
    for (Eigen::Index j = 0; j < lo.size(); ++j) {
      out[j] = lo[j] + UniformUnit(engine) * (hi[j] - lo[j]);
    }
    return out;
  };

  RandomEngine engine = MakeStream({seed, ChannelId(StreamChannel::kProbe)});
  double best = 0.0;
  for (int s = 0; s < sample_count; ++s) {
    for (int i = 0; i < m; ++i) {
      const Player& p = game.player(i);
      const Vector xi = sample_box(p.box.lower(), p.box.upper(), engine);
      Vector u1;
      Vector u2;
      do {
        u1 = game.AggregateArgument(sample_box(avg_lower, avg_upper, engine));
        u2 = game.AggregateArgument(sample_box(avg_lower, avg_upper, engine));
      } while ((u1 - u2).squaredNorm() == 0.0);
      const Vector f1 = p.field.evaluate(xi, u1);
      const Vector f2 = p.field.evaluate(xi, u2);
      if (!f1.allFinite() || !f2.allFinite()) {
        return absl::OutOfRangeError(absl::StrCat(
            "pseudo-gradient of player ", i, " is not finite"));
      }
      best = std::max(best, (f1 - f2).norm() / (u1 - u2).norm());
    }
  }
  return best;
}

}  // namespace dpnash
