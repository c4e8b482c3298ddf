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

#include "dpnash/privacy.h"

#include <cmath>
#include <limits>
#include <utility>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace dpnash {

double SampleLaplaceScalar(double nu, RandomEngine& stream) {
  const double u = UniformCentered(stream);
  return -nu * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

Vector SampleLaplace(double nu, int dimension, RandomEngine& stream) {
  Vector out(dimension);
  for (int j = 0; j < dimension; ++j) out[j] = SampleLaplaceScalar(nu, stream);
  return out;
}

LaplaceNoiseSource::LaplaceNoiseSource(PolySchedule nu, int dimension,
                                       int num_players, uint64_t master_seed,
                                       uint64_t run_seed)
    : nu_(std::move(nu)), dimension_(dimension) {
  streams_.reserve(num_players);
  for (int i = 0; i < num_players; ++i) {
    streams_.push_back(MakeStream({master_seed, run_seed,
                                   ChannelId(StreamChannel::kPrivacyNoise),
                                   static_cast<uint64_t>(i)}));
  }
}

std::vector<Vector> LaplaceNoiseSource::Draw(int64_t k) {
  const double scale = nu_(k);
  std::vector<Vector> out;
  out.reserve(streams_.size());
  for (RandomEngine& stream : streams_) {
    out.push_back(SampleLaplace(scale, dimension_, stream));
  }
  return out;
}

absl::StatusOr<double> SensitivityBound(double lambda_k, double c_bar) {
  if (!(lambda_k >= 0.0) || !(c_bar >= 0.0)) {
    return absl::InvalidArgumentError(
        "step size and gradient bound must be non-negative");
  }
  return 2.0 * lambda_k * c_bar;
}

namespace {

absl::Status CheckPolynomial(const PolySchedule& s, const char* role) {
  if (s.form() == ScheduleForm::kCustom) {
    return absl::FailedPreconditionError(absl::StrCat(
        role, " schedule ", s.DebugString(),
        " is not in closed form; its series cannot be bounded"));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<BudgetReport> CumulativeBudget(const PolySchedule& lambda,
                                              const PolySchedule& nu,
                                              double c_bar, int64_t horizon,
                                              int64_t start_index) {
  if (horizon < 1) return absl::InvalidArgumentError("horizon must be >= 1");
  if (!(c_bar > 0.0)) return absl::InvalidArgumentError("c_bar must be > 0");
  if (start_index < lambda.first_index() || start_index < nu.first_index()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "schedules are undefined at the start index ", start_index));
  }
  BudgetReport report;
  for (int64_t k = start_index; k <= horizon; ++k) {
    report.partial += 2.0 * c_bar * lambda(k) / nu(k);
  }
  const SummabilityClass lc = Classify(lambda);
  const SummabilityClass nc = Classify(nu);
  const double exponent = lc.exponent - nc.exponent;
  report.finite = !std::isnan(exponent) && PowerSeriesConverges(exponent);
  if (lc.decided_by == DecidedBy::kNumericHeuristic ||
      nc.decided_by == DecidedBy::kNumericHeuristic) {
    report.decided_by = DecidedBy::kNumericHeuristic;
    report.tail_bound = std::numeric_limits<double>::infinity();
    return report;
  }
  if (!report.finite) {
    report.tail_bound = std::numeric_limits<double>::infinity();
    return report;
  }
  // λ(k)/ν(k) <= (U_λ/L_ν)·k^e for k >= 1, and the envelope is decreasing,
  // so Σ_{k>H} <= ∫_H^∞ (U_λ/L_ν) t^e dt.
  const PowerEnvelope le = *lambda.Envelope();
  const PowerEnvelope ne = *nu.Envelope();
  const double coefficient = 2.0 * c_bar * le.upper / ne.lower;
  const double h = static_cast<double>(std::max<int64_t>(horizon, 1));
  report.tail_bound = coefficient * std::pow(h, exponent + 1.0) / -(exponent + 1.0);
  return report;
}

absl::StatusOr<double> RatioSeriesSum(const PolySchedule& lambda,
                                      const PolySchedule& nu_prime,
                                      int64_t start_index) {
  if (auto s = CheckPolynomial(lambda, "lambda"); !s.ok()) return s;
  if (auto s = CheckPolynomial(nu_prime, "nu'"); !s.ok()) return s;
  if (start_index < lambda.first_index() || start_index < nu_prime.first_index()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "schedules are undefined at the start index ", start_index));
  }
  const double exponent =
      *lambda.AsymptoticExponent() - *nu_prime.AsymptoticExponent();
  if (!PowerSeriesConverges(exponent)) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "calibration error: sum of lambda/nu' diverges (term exponent %g >= "
        "-1)",
        exponent));
  }

  constexpr double kTermFloor = 1e-12;
  constexpr int64_t kMaxTerms = 100000;
  double partial = 0.0;
  int64_t k = start_index;
  for (; k < start_index + kMaxTerms; ++k) {
    const double term = lambda(k) / nu_prime(k);
    partial += term;
    if (term < kTermFloor) {
      ++k;
      break;
    }
  }
  // Midpoint rule: Σ_{j>=k} r(j) ≈ ∫_{k-1/2}^∞ r(t) dt; for convex decreasing
  // r the integral is the larger of the two.
  const double origin = static_cast<double>(k) - 0.5;
  auto ratio = [&](double s) {
    return lambda.ValueAt(origin + s) / nu_prime.ValueAt(origin + s);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  double error = 0.0;
  const double tail = integrator.integrate(
      ratio, 0.0, std::numeric_limits<double>::infinity(), 1e-13, &error);
  if (!std::isfinite(tail)) {
    return absl::InternalError("numerical error: tail integral diverged");
  }
  return partial + tail;
}

absl::StatusOr<NoiseCalibration> CalibrateNoise(const PolySchedule& lambda,
                                                const PolySchedule& nu_prime,
                                                double eps_target,
                                                double c_bar,
                                                int64_t start_index) {
  if (!(eps_target > 0.0) || !std::isfinite(eps_target)) {
    return absl::InvalidArgumentError("eps_target must be positive and finite");
  }
  if (!(c_bar > 0.0)) return absl::InvalidArgumentError("c_bar must be > 0");
  absl::StatusOr<double> phi = RatioSeriesSum(lambda, nu_prime, start_index);
  if (!phi.ok()) return phi.status();
  NoiseCalibration out{nu_prime, *phi, 2.0 * c_bar * *phi / eps_target};
  out.nu = nu_prime.Scaled(out.scale);
  return out;
}

absl::StatusOr<double> GeometricNoiseScale(double lambda0, double q,
                                           double eps_target, double c_bar) {
  if (!(q > 0.0 && q < 1.0)) {
    return absl::InvalidArgumentError("geometric ratio q must lie in (0, 1)");
  }
  if (!(lambda0 > 0.0) || !(eps_target > 0.0) || !(c_bar > 0.0)) {
    return absl::InvalidArgumentError(
        "lambda0, eps_target and c_bar must be positive");
  }
  return 2.0 * c_bar * lambda0 / ((1.0 - q) * eps_target);
}

void PrivacyLedger::Record(int64_t k, double lambda_k, double nu_k) {
  Entry e;
  e.k = k;
  e.lambda = lambda_k;
  e.nu = nu_k;
  e.delta = 2.0 * lambda_k * c_bar_;
  e.increment = e.delta / nu_k;
  e.cumulative_eps = cumulative_eps() + e.increment;
  entries_.push_back(e);
}

void PrivacyLedger::WriteCsv(std::ostream& out) const {
  out << "k,lambda,nu,delta,increment,cumulative_eps\n";
  for (const Entry& e : entries_) {
    out << absl::StrFormat("%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.k, e.lambda,
                           e.nu, e.delta, e.increment, e.cumulative_eps);
  }
}

Vector ClipL1(const Vector& g, double c_bar) {
  const double norm = g.lpNorm<1>();
  if (norm <= c_bar) return g;
  return g * (c_bar / norm);
}

namespace {

absl::Status CheckAdjacent(const GameSpec& a, const GameSpec& b,
                           int differing_player, const SolverState& state) {
  if (a.num_players() != b.num_players() || a.dimension() != b.dimension() ||
      a.convention() != b.convention()) {
    return absl::InvalidArgumentError(
        "games are not adjacent: player count, dimension or aggregate "
        "convention differ");
  }
  const int m = a.num_players();
  if (differing_player < 0 || differing_player >= m) {
    return absl::InvalidArgumentError(
        absl::StrCat("differing player ", differing_player, " out of range"));
  }
  if (state.num_players() != m || static_cast<int>(state.v.size()) != m) {
    return absl::InvalidArgumentError("state does not match the game");
  }
  // Fields are opaque callables; compare them on the state's own arguments
  // and on the box corners.
  for (int j = 0; j < m; ++j) {
    if (!(a.player(j).box == b.player(j).box)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "games are not adjacent: feasible sets differ for player ", j));
    }
    if (j == differing_player) continue;
    const FeasibleBox& box = a.player(j).box;
    const std::vector<std::pair<Vector, Vector>> probes = {
        {state.x[j], a.AggregateArgument(state.v[j])},
        {box.lower(), a.AggregateArgument(box.upper())},
        {box.upper(), a.AggregateArgument(box.lower())},
    };
    for (const auto& [own, u] : probes) {
      if (a.player(j).field.evaluate(own, u) !=
          b.player(j).field.evaluate(own, u)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "games are not adjacent: pseudo-gradients differ for player ", j,
            " besides player ", differing_player));
      }
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<SensitivityProbeResult> OneStepSensitivityProbe(
    const GameSpec& game_a, const GameSpec& game_b, int differing_player,
    const SolverState& state, double lambda_k, double c_bar) {
  if (auto s = CheckAdjacent(game_a, game_b, differing_player, state); !s.ok()) {
    return s;
  }
  absl::StatusOr<double> bound = SensitivityBound(lambda_k, c_bar);
  if (!bound.ok()) return bound.status();

  SensitivityProbeResult result;
  result.bound = *bound;
  for (int j = 0; j < game_a.num_players(); ++j) {
    const Vector u = game_a.AggregateArgument(state.v[j]);
    const Vector ga = ClipL1(game_a.player(j).field.evaluate(state.x[j], u), c_bar);
    const Vector gb = ClipL1(game_b.player(j).field.evaluate(state.x[j], u), c_bar);
    const FeasibleBox& box = game_a.player(j).box;
    const Vector xa = ProjectUnchecked(box, state.x[j] - lambda_k * ga);
    const Vector xb = ProjectUnchecked(box, state.x[j] - lambda_k * gb);
    result.measured += (xa - xb).lpNorm<1>();
  }
  result.pass = result.measured <= result.bound + 1e-12;
  return result;
}

}  // namespace dpnash
