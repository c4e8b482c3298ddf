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

#include "dpnash/schedules.h"

#include <cmath>
#include <functional>

#include "absl/status/status.h"
#include "gtest/gtest.h"

namespace dpnash {
namespace {

PolySchedule Power(double p) { return *PolySchedule::Monomial(1.0, p); }

TEST(PolyScheduleTest, EvaluatesClosedForms) {
  EXPECT_DOUBLE_EQ(*PolySchedule::Rational(0.1, 0.1, 1.0)->Evaluate(0), 0.1);
  EXPECT_DOUBLE_EQ(*PolySchedule::Rational(1.0, 0.1, 0.9)->Evaluate(0), 1.0);
  EXPECT_DOUBLE_EQ(*PolySchedule::Monomial(0.1, 0.2, 1.0)->Evaluate(1), 1.1);
  EXPECT_DOUBLE_EQ(*PolySchedule::Rational(0.1, 0.1, 1.0)->Evaluate(10), 0.05);
  EXPECT_DOUBLE_EQ(PolySchedule::Constant(3.0)(12345), 3.0);
}

TEST(PolyScheduleTest, DomainErrors) {
  const PolySchedule inv = Power(-1.0);
  EXPECT_EQ(inv.first_index(), 1);
  EXPECT_EQ(inv.Evaluate(0).status().code(), absl::StatusCode::kInvalidArgument);
  EXPECT_DOUBLE_EQ(*inv.Evaluate(4), 0.25);
  EXPECT_EQ(Power(0.3).first_index(), 1);
  EXPECT_EQ(PolySchedule::Monomial(0.1, 0.2, 1.0)->first_index(), 0);
  EXPECT_FALSE(PolySchedule::Rational(0.0, 1.0, 1.0).ok());
  EXPECT_FALSE(PolySchedule::Rational(1.0, -1.0, 1.0).ok());
  EXPECT_FALSE(PolySchedule::Monomial(0.0, 1.0, 0.0).ok());
  EXPECT_FALSE(PolySchedule::Monomial(1.0, NAN).ok());
}

TEST(PolyScheduleTest, RationalIsNonIncreasing) {
  const PolySchedule s = *PolySchedule::Rational(1.0, 0.1, 0.9);
  for (int64_t k = 0; k < 100000; k += 13) EXPECT_GE(s(k), s(k + 1));
}

TEST(PolyScheduleTest, AsymptoticExponents) {
  EXPECT_DOUBLE_EQ(*PolySchedule::Rational(0.1, 0.1, 1.0)->AsymptoticExponent(), -1.0);
  EXPECT_DOUBLE_EQ(*PolySchedule::Monomial(0.1, 0.2, 1.0)->AsymptoticExponent(), 0.2);
  EXPECT_DOUBLE_EQ(*PolySchedule::Monomial(1.0, -0.5, 2.0)->AsymptoticExponent(), 0.0);
  EXPECT_DOUBLE_EQ(*PolySchedule::Constant(2.0).AsymptoticExponent(), 0.0);
  EXPECT_FALSE(PolySchedule::Custom("c", [](int64_t) { return 1.0; })
                   .AsymptoticExponent()
                   .has_value());
}

TEST(PolyScheduleTest, ScaledMultipliesEveryTerm) {
  const PolySchedule s = *PolySchedule::Monomial(0.1, 0.2, 1.0);
  const PolySchedule t = s.Scaled(3.0);
  for (int64_t k : {0, 1, 7, 1000}) EXPECT_DOUBLE_EQ(t(k), 3.0 * s(k));
}

TEST(ConvergenceConditionsTest, WeakerCouplingPasses) {
  const ConditionReport r = CheckConvergenceConditions(Power(-1.0), Power(-0.9));
  EXPECT_TRUE(r.all_pass()) << r.FailureSummary();
  EXPECT_EQ(r.decided_by, DecidedBy::kExponentRule);
  ASSERT_EQ(r.conditions.size(), 4u);
  EXPECT_NEAR(r.conditions[3].exponent, -1.1, 1e-12);
}

TEST(ConvergenceConditionsTest, EqualRatesFailRatioCondition) {
  const ConditionReport r = CheckConvergenceConditions(Power(-1.0), Power(-1.0));
  EXPECT_FALSE(r.all_pass());
  EXPECT_EQ(r.FailureSummary(), "sum lambda^2/gamma finite");
}

TEST(ConvergenceConditionsTest, SlowCouplingFailsSquareSummability) {
  const ConditionReport r = CheckConvergenceConditions(Power(-1.0), Power(-0.4));
  EXPECT_FALSE(r.all_pass());
  EXPECT_EQ(r.FailureSummary(), "sum gamma^2 finite");
}

TEST(ConvergenceConditionsTest, ExperimentSchedulesPass) {
  EXPECT_TRUE(CheckConvergenceConditions(*PolySchedule::Rational(0.1, 0.1, 1.0),
                                         *PolySchedule::Rational(1.0, 0.1, 0.9))
                  .all_pass());
}

TEST(ConvergenceConditionsTest, CustomScheduleIsInconclusive) {
  const PolySchedule custom = PolySchedule::Custom(
      "harmonic", [](int64_t k) { return 1.0 / static_cast<double>(k); }, 1);
  const ConditionReport r = CheckConvergenceConditions(custom, Power(-0.9));
  EXPECT_EQ(r.decided_by, DecidedBy::kNumericHeuristic);
  EXPECT_TRUE(r.inconclusive);
  EXPECT_NEAR(EstimateExponentNumerically(custom), -1.0, 1e-3);
}

TEST(NoiseConditionTest, Examples) {
  EXPECT_TRUE(CheckNoiseCondition(Power(-0.9), Power(0.3)).all_pass());
  EXPECT_FALSE(CheckNoiseCondition(Power(-0.9), Power(0.5)).all_pass());
  EXPECT_TRUE(CheckNoiseCondition(Power(-0.9), PolySchedule::Constant(2.0)).all_pass());
  EXPECT_NEAR(CheckNoiseCondition(Power(-0.9), Power(0.3)).conditions[0].exponent,
              -1.2, 1e-12);
}

TEST(StochasticConditionTest, Examples) {
  EXPECT_TRUE(CheckStochasticCondition(Power(-1.0), Power(0.4)).all_pass());
  EXPECT_FALSE(CheckStochasticCondition(Power(-1.0), Power(0.5)).all_pass());
  EXPECT_TRUE(
      CheckStochasticCondition(Power(-1.0), PolySchedule::Constant(1.0)).all_pass());
}

TEST(ClassifyTest, BoundaryExponentDiverges) {
  EXPECT_FALSE(PowerSeriesConverges(-1.0));
  EXPECT_TRUE(PowerSeriesConverges(-1.0000001));
  const SummabilityClass harmonic = Classify(Power(-1.0));
  EXPECT_TRUE(harmonic.sum_diverges);
  EXPECT_TRUE(harmonic.square_summable);
  const SummabilityClass slow = Classify(Power(-0.4));
  EXPECT_TRUE(slow.sum_diverges);
  EXPECT_FALSE(slow.square_summable);
}

// Exponent-rule verdicts against partial sums up to 10^6. A convergent
// series has its last increment below 1e-6 and gains less than 0.5 when the
// horizon doubles from 5·10^5; a divergent one gains more than 0.5.
double PartialSum(const std::function<double(double)>& term, int64_t from,
                  int64_t to) {
  double s = 0.0;
  for (int64_t k = to; k >= from; --k) s += term(static_cast<double>(k));
  return s;
}

TEST(ClassifyTest, AgreesWithPartialSums) {
  for (double e : {-2.0, -1.8, -1.2, -1.1, -1.0, -0.9, -0.8, -0.5}) {
    auto term = [e](double k) { return std::pow(k, e); };
    const double doubling_gain = PartialSum(term, 500001, 1000000);
    const bool convergent = Classify(Power(e)).sum_diverges == false;
    EXPECT_EQ(convergent, PowerSeriesConverges(e)) << e;
    if (convergent) {
      EXPECT_LT(term(1e6), 1e-6) << e;
      EXPECT_LT(doubling_gain, 0.5) << e;
    } else {
      EXPECT_GT(doubling_gain, 0.5) << e;
    }
  }
}

}  // namespace
}  // namespace dpnash
