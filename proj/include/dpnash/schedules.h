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

#ifndef DPNASH_SCHEDULES_H_
#define DPNASH_SCHEDULES_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace dpnash {

enum class ScheduleForm {
  // a / (1 + b·k^p)
  kRational,
  // a·k^p + c
  kMonomial,
  // Arbitrary user sequence; summability is only estimated.
  kCustom,
};

// Power-law bracket lower·k^exponent <= s(k) <= upper·k^exponent, valid for
// every k >= 1.
struct PowerEnvelope {
  double exponent = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// A positive step-size/noise sequence indexed by the iteration k.
class PolySchedule {
 public:
  using Sequence = std::function<double(int64_t)>;

  static absl::StatusOr<PolySchedule> Rational(double a, double b, double p);
  static absl::StatusOr<PolySchedule> Monomial(double a, double p,
                                               double c = 0.0);
  static PolySchedule Constant(double value);
  static PolySchedule Custom(std::string name, Sequence sequence,
                             int64_t first_index = 0);

  ScheduleForm form() const { return form_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double p() const { return p_; }
  const std::string& name() const { return name_; }

  // Smallest k at which the sequence is defined and positive: 1 when k^p
  // with p < 0 appears, or when the value at 0 would be zero; else 0.
  int64_t first_index() const { return first_index_; }

  absl::StatusOr<double> Evaluate(int64_t k) const;

  // Unchecked evaluation; k must be >= first_index().
  double operator()(int64_t k) const;

  // The closed form at a real argument t (kRational/kMonomial only; NaN for
  // kCustom). Used for integral tail estimates.
  double ValueAt(double t) const;

  // Asymptotic decay/growth exponent e with s(k) ~ k^e. Empty for kCustom.
  std::optional<double> AsymptoticExponent() const;
  std::optional<PowerEnvelope> Envelope() const;

  // Multiplies every term by `factor` > 0.
  PolySchedule Scaled(double factor) const;

  std::string DebugString() const;

 private:
  PolySchedule() = default;

  ScheduleForm form_ = ScheduleForm::kRational;
  double a_ = 0.0;
  double b_ = 0.0;
  double c_ = 0.0;
  double p_ = 0.0;
  double scale_ = 1.0;  // only used by kCustom
  int64_t first_index_ = 0;
  std::string name_;
  Sequence sequence_;
};

enum class DecidedBy { kExponentRule, kNumericHeuristic };

struct SummabilityClass {
  bool sum_diverges = false;
  bool square_summable = false;
  DecidedBy decided_by = DecidedBy::kExponentRule;
  double exponent = 0.0;
};

// p-series rule: Σ k^e < ∞ iff e < -1. The boundary e = -1 diverges.
inline bool PowerSeriesConverges(double exponent) { return exponent < -1.0; }

SummabilityClass Classify(const PolySchedule& s);

// Exponent estimate used for kCustom sequences: log2(s(2K)/s(K)) at
// K = 2^20. Returns -inf for faster-than-polynomial decay.
double EstimateExponentNumerically(const PolySchedule& s);

struct ConditionVerdict {
  std::string name;
  bool pass = false;
  // Exponent of the series term whose summability is being decided.
  double exponent = 0.0;
};

struct ConditionReport {
  std::vector<ConditionVerdict> conditions;
  DecidedBy decided_by = DecidedBy::kExponentRule;
  // Set when a verdict rests on the numeric heuristic.
  bool inconclusive = false;

  bool all_pass() const;
  // Names of failed conditions, "" when all pass.
  std::string FailureSummary() const;
};

// Σγ = ∞, Σλ = ∞, Σγ² < ∞, Σλ²/γ < ∞.
ConditionReport CheckConvergenceConditions(const PolySchedule& lambda,
                                           const PolySchedule& gamma);

// Σ (γ^k)² (σ^k)² < ∞.
ConditionReport CheckNoiseCondition(const PolySchedule& gamma,
                                    const PolySchedule& sigma);

// Σ (λ^k μ^k)² < ∞.
ConditionReport CheckStochasticCondition(const PolySchedule& lambda,
                                         const PolySchedule& mu);

}  // namespace dpnash

#endif  // DPNASH_SCHEDULES_H_
