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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "absl/status/status.h"
#include "dpnash/cournot.h"
#include "gtest/gtest.h"

namespace dpnash {
namespace {

// ζ(1.3), from mpmath.zeta(1.3) at 30 digits.
constexpr double kZeta13 = 3.93194921180954373664;
// Σ_{k>=0} 0.1/(1+0.1k) / (1+0.1k^0.2): mpmath direct sum to 5·10^4 plus an
// Euler-Maclaurin tail, the integral taken in u = k^0.2; 30 digits.
constexpr double kExperimentRatioSum = 10.0392823667414424581701672436;

PolySchedule Power(double p, double a = 1.0) {
  return *PolySchedule::Monomial(a, p);
}

double LaplaceCdf(double x, double nu) {
  return x < 0.0 ? 0.5 * std::exp(x / nu) : 1.0 - 0.5 * std::exp(-x / nu);
}

TEST(SampleLaplaceTest, MomentsAtOneMillionSamples) {
  RandomEngine stream = MakeStream({1, 2, 3});
  const Vector x = SampleLaplace(1.0, 1000000, stream);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / (x.size() - 1);
  EXPECT_NEAR(mean, 0.0, 0.005);
  EXPECT_NEAR(var, 2.0, 0.05);
}

TEST(SampleLaplaceTest, DeterministicAndScaleFamily) {
  RandomEngine a = MakeStream({7});
  RandomEngine b = MakeStream({7});
  RandomEngine c = MakeStream({7});
  const Vector x1 = SampleLaplace(1.0, 1000, a);
  const Vector x1_again = SampleLaplace(1.0, 1000, b);
  const Vector x2 = SampleLaplace(2.0, 1000, c);
  EXPECT_EQ(x1, x1_again);
  EXPECT_EQ(x2, 2.0 * x1);
}

// Kolmogorov-Smirnov at 1% significance: D·sqrt(n) < 1.628 (asymptotic
// critical value of the Kolmogorov distribution).
TEST(SampleLaplaceTest, KolmogorovSmirnov) {
  for (double nu : {0.5, 1.0, 5.0}) {
    RandomEngine stream = MakeStream({11, static_cast<uint64_t>(nu * 10)});
    const Vector x = SampleLaplace(nu, 100000, stream);
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (size_t i = 0; i < sorted.size(); ++i) {
      const double f = LaplaceCdf(sorted[i], nu);
      d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    EXPECT_LT(d * std::sqrt(n), 1.628) << "nu=" << nu;
  }
}

TEST(LaplaceNoiseSourceTest, PlayerStreamsAreSeparateAndReproducible) {
  const PolySchedule nu = *PolySchedule::Monomial(0.1, 0.2, 1.0);
  LaplaceNoiseSource a(nu, 3, 4, 9, 2);
  LaplaceNoiseSource b(nu, 3, 4, 9, 2);
  for (int64_t k = 0; k < 5; ++k) {
    const std::vector<Vector> za = a.Draw(k);
    const std::vector<Vector> zb = b.Draw(k);
    ASSERT_EQ(za.size(), 4u);
    EXPECT_EQ(za, zb);
    EXPECT_NE(za[0], za[1]);
  }
  RandomEngine player2 =
      MakeStream({9, 2, ChannelId(StreamChannel::kPrivacyNoise), 2});
  LaplaceNoiseSource c(nu, 3, 4, 9, 2);
  EXPECT_EQ(c.Draw(0)[2], SampleLaplace(nu(0), 3, player2));
  EXPECT_EQ(c.Draw(1)[2], SampleLaplace(nu(1), 3, player2));
}

TEST(SensitivityBoundTest, Examples) {
  EXPECT_DOUBLE_EQ(*SensitivityBound(0.01, 5.0), 0.1);
  EXPECT_DOUBLE_EQ(*SensitivityBound(0.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(*SensitivityBound(Power(-1.0)(4), 1.0), 0.5);
  EXPECT_FALSE(SensitivityBound(-1.0, 1.0).ok());
}

TEST(RatioSeriesSumTest, ReproducesZetaOnePointThree) {
  EXPECT_NEAR(*RatioSeriesSum(Power(-1.0), Power(0.3)), kZeta13, 1e-8);
}

TEST(RatioSeriesSumTest, ExperimentSchedulesFromZero) {
  EXPECT_NEAR(*RatioSeriesSum(*PolySchedule::Rational(0.1, 0.1, 1.0),
                              *PolySchedule::Monomial(0.1, 0.2, 1.0), 0),
              kExperimentRatioSum, 1e-8);
}

TEST(RatioSeriesSumTest, DivergentSeriesIsCalibrationError) {
  absl::StatusOr<double> sum = RatioSeriesSum(Power(-1.0), Power(-1.0));
  EXPECT_EQ(sum.status().code(), absl::StatusCode::kFailedPrecondition);
  EXPECT_NE(sum.status().message().find("calibration error"), std::string::npos);
}

TEST(CalibrateNoiseTest, ScaleFactor) {
  const NoiseCalibration cal = *CalibrateNoise(Power(-1.0), Power(0.3), 1.0, 1.0);
  EXPECT_NEAR(cal.phi, kZeta13, 1e-8);
  EXPECT_NEAR(cal.scale, 2.0 * kZeta13, 2e-8);
  EXPECT_NEAR(cal.scale, 7.87, 0.01);
  EXPECT_DOUBLE_EQ(cal.nu(8), cal.scale * std::pow(8.0, 0.3));
}

TEST(CalibrateNoiseTest, DoublingEpsilonHalvesScaleAndBudget) {
  const NoiseCalibration one = *CalibrateNoise(Power(-1.0), Power(0.3), 1.0, 1.0);
  const NoiseCalibration two = *CalibrateNoise(Power(-1.0), Power(0.3), 2.0, 1.0);
  EXPECT_DOUBLE_EQ(two.scale, one.scale / 2.0);
  const double b1 = CumulativeBudget(Power(-1.0), one.nu, 1.0, 1000)->partial;
  const double b2 = CumulativeBudget(Power(-1.0), two.nu, 1.0, 1000)->partial;
  EXPECT_NEAR(b2, 2.0 * b1, 1e-12);
}

TEST(CalibrateNoiseTest, Errors) {
  EXPECT_EQ(CalibrateNoise(Power(-1.0), Power(-1.0), 1.0, 1.0).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_EQ(CalibrateNoise(Power(-1.0), Power(0.3), 0.0, 1.0).status().code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(CumulativeBudgetTest, CalibratedScheduleApproachesTarget) {
  const NoiseCalibration cal = *CalibrateNoise(Power(-1.0), Power(0.3), 1.0, 1.0);
  double previous_partial = 0.0;
  double previous_bound = std::numeric_limits<double>::infinity();
  for (int64_t h : {10, 100, 1000, 10000, 100000, 1000000}) {
    const BudgetReport r = *CumulativeBudget(Power(-1.0), cal.nu, 1.0, h);
    EXPECT_TRUE(r.finite);
    EXPECT_LE(r.partial, 1.0);
    // The tail bound over-covers, so the bound never drops below the target.
    EXPECT_GE(r.partial + r.tail_bound, 1.0 - 1e-9);
    EXPECT_GT(r.partial, previous_partial);
    EXPECT_LE(r.partial + r.tail_bound, previous_bound + 1e-12);
    previous_partial = r.partial;
    previous_bound = r.partial + r.tail_bound;
  }
  EXPECT_NEAR(previous_bound, 1.0, 1e-3);
}

TEST(CumulativeBudgetTest, ConstantNoiseOnHarmonicStepDiverges) {
  const BudgetReport r =
      *CumulativeBudget(Power(-1.0), PolySchedule::Constant(1.0), 1.0, 100);
  EXPECT_FALSE(r.finite);
  EXPECT_TRUE(std::isinf(r.tail_bound));
}

TEST(CumulativeBudgetTest, SingleTerm) {
  const BudgetReport r =
      *CumulativeBudget(Power(-1.0), PolySchedule::Constant(2.0), 1.0, 1);
  EXPECT_DOUBLE_EQ(r.partial, 1.0);
  EXPECT_EQ(CumulativeBudget(Power(-1.0), PolySchedule::Constant(2.0), 1.0, 0)
                .status()
                .code(),
            absl::StatusCode::kInvalidArgument);
}

TEST(GeometricNoiseScaleTest, ClosedFormSumsToTarget) {
  const double nu = *GeometricNoiseScale(0.1, 0.995, 1.0, 1.0);
  EXPECT_NEAR(nu, 40.0, 1e-12);
  double total = 0.0;
  for (int k = 0; k < 20000; ++k) total += 2.0 * 0.1 * std::pow(0.995, k) / nu;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_FALSE(GeometricNoiseScale(0.1, 1.0, 1.0, 1.0).ok());
}

TEST(PrivacyLedgerTest, RecordsAndExports) {
  PrivacyLedger ledger(3.0);
  ledger.Record(1, 0.5, 2.0);
  ledger.Record(2, 0.25, 4.0);
  ASSERT_EQ(ledger.entries().size(), 2u);
  EXPECT_DOUBLE_EQ(ledger.entries()[0].delta, 3.0);
  EXPECT_DOUBLE_EQ(ledger.entries()[1].delta, 1.5);
  EXPECT_DOUBLE_EQ(ledger.entries()[0].increment, 1.5);
  EXPECT_DOUBLE_EQ(ledger.cumulative_eps(), 1.875);
  std::ostringstream csv;
  ledger.WriteCsv(csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "k,lambda,nu,delta,increment,cumulative_eps");
  EXPECT_NE(csv.str().find("\n2,0.25,4,1.5,0.375,1.875\n"), std::string::npos);
}

TEST(ClipL1Test, ScalesOntoBall) {
  Vector g(2);
  g << 3.0, -1.0;
  EXPECT_EQ(ClipL1(g, 10.0), g);
  const Vector c = ClipL1(g, 2.0);
  EXPECT_NEAR(c.lpNorm<1>(), 2.0, 1e-15);
  EXPECT_NEAR(c[0] / c[1], -3.0, 1e-15);
}

// Game with F_i(x, u) = scale_i·(x - target_i) + u on [0, 5]^2.
GameSpec ShiftGame(int m, int changed, double shift) {
  std::vector<Player> players;
  for (int i = 0; i < m; ++i) {
    const double offset = 1.0 + i + (i == changed ? shift : 0.0);
    players.push_back(Player{
        *FeasibleBox::Uniform(2, 0.0, 5.0),
        {2, [offset](const Vector& x, const Vector& u) {
           return Vector(2.0 * (x.array() - offset).matrix() + u);
         }}});
  }
  return *GameSpec::Create(std::move(players));
}

SolverState RandomState(const GameSpec& game, RandomEngine& engine) {
  SolverState state;
  state.x = SampleUniformProfile(game, engine).Blocks();
  state.v = SampleUniformProfile(game, engine).Blocks();
  return state;
}

TEST(SensitivityProbeTest, IdenticalGamesAndFrozenStep) {
  const GameSpec game = ShiftGame(3, -1, 0.0);
  RandomEngine engine = MakeStream({3});
  const SolverState state = RandomState(game, engine);
  EXPECT_EQ(OneStepSensitivityProbe(game, game, 1, state, 0.05, 3.0)->measured, 0.0);
  const GameSpec other = ShiftGame(3, 1, 7.0);
  const SensitivityProbeResult frozen =
      *OneStepSensitivityProbe(game, other, 1, state, 0.0, 3.0);
  EXPECT_EQ(frozen.measured, 0.0);
  EXPECT_TRUE(frozen.pass);
}

TEST(SensitivityProbeTest, BoundHoldsOnRandomStates) {
  const GameSpec a = ShiftGame(4, -1, 0.0);
  const GameSpec b = ShiftGame(4, 1, 9.0);
  RandomEngine engine = MakeStream({4});
  for (int trial = 0; trial < 100; ++trial) {
    const SolverState state = RandomState(a, engine);
    const SensitivityProbeResult r =
        *OneStepSensitivityProbe(a, b, 1, state, 0.05, 3.0);
    EXPECT_DOUBLE_EQ(r.bound, 0.3);
    EXPECT_LE(r.measured, 0.3 + 1e-12);
    EXPECT_TRUE(r.pass);
  }
}

TEST(SensitivityProbeTest, RejectsNonAdjacentGames) {
  const GameSpec a = ShiftGame(3, -1, 0.0);
  RandomEngine engine = MakeStream({5});
  const SolverState state = RandomState(a, engine);
  EXPECT_EQ(OneStepSensitivityProbe(a, ShiftGame(3, 2, 1.0), 1, state, 0.1, 1.0)
                .status()
                .code(),
            absl::StatusCode::kInvalidArgument);
  std::vector<Player> players = a.players();
  players[1].box = *FeasibleBox::Uniform(2, 0.0, 4.0);
  const GameSpec other_box = *GameSpec::Create(players);
  EXPECT_EQ(OneStepSensitivityProbe(a, other_box, 1, state, 0.1, 1.0)
                .status()
                .code(),
            absl::StatusCode::kInvalidArgument);
}

}  // namespace
}  // namespace dpnash
