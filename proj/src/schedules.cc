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
#include <limits>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace dpnash {
namespace {

absl::Status CheckCoefficient(const char* name, double value) {
  if (!std::isfinite(value) || value < 0.0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "schedule coefficient ", name, " must be finite and >= 0, got ",
        value));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<PolySchedule> PolySchedule::Rational(double a, double b,
                                                    double p) {
  if (auto s = CheckCoefficient("a", a); !s.ok()) return s;
  if (auto s = CheckCoefficient("b", b); !s.ok()) return s;
  if (!std::isfinite(p)) {
    return absl::InvalidArgumentError("schedule exponent p must be finite");
  }
  if (a == 0.0) {
    return absl::InvalidArgumentError("rational schedule needs a > 0");
  }
  PolySchedule s;
  s.form_ = ScheduleForm::kRational;
  s.a_ = a;
  s.b_ = b;
  s.p_ = p;
  s.first_index_ = (b > 0.0 && p < 0.0) ? 1 : 0;
  return s;
}

absl::StatusOr<PolySchedule> PolySchedule::Monomial(double a, double p,
                                                    double c) {
  if (auto s = CheckCoefficient("a", a); !s.ok()) return s;
  if (auto s = CheckCoefficient("c", c); !s.ok()) return s;
  if (!std::isfinite(p)) {
    return absl::InvalidArgumentError("schedule exponent p must be finite");
  }
  if (a == 0.0 && c == 0.0) {
    return absl::InvalidArgumentError("monomial schedule is identically zero");
  }
  PolySchedule s;
  s.form_ = ScheduleForm::kMonomial;
  s.a_ = a;
  s.c_ = c;
  s.p_ = p;
  const bool singular_at_zero = a > 0.0 && p < 0.0;
  const bool zero_at_zero = c == 0.0 && p > 0.0;
  s.first_index_ = (singular_at_zero || zero_at_zero) ? 1 : 0;
  return s;
}

PolySchedule PolySchedule::Constant(double value) {
  PolySchedule s;
  s.form_ = ScheduleForm::kRational;
  s.a_ = value;
  return s;
}

PolySchedule PolySchedule::Custom(std::string name, Sequence sequence,
                                  int64_t first_index) {
  PolySchedule s;
  s.form_ = ScheduleForm::kCustom;
  s.name_ = std::move(name);
  s.sequence_ = std::move(sequence);
  s.first_index_ = first_index;
  return s;
}

absl::StatusOr<double> PolySchedule::Evaluate(int64_t k) const {
  if (k < first_index_) {
    return absl::InvalidArgumentError(
        absl::StrCat("schedule ", DebugString(), " is undefined at k = ", k,
                     "; first valid index is ", first_index_));
  }
  const double value = (*this)(k);
  if (!std::isfinite(value) || value <= 0.0) {
    return absl::OutOfRangeError(absl::StrCat(
        "schedule ", DebugString(), " is not positive at k = ", k));
  }
  return value;
}

double PolySchedule::operator()(int64_t k) const {
  if (form_ == ScheduleForm::kCustom) return scale_ * sequence_(k);
  return ValueAt(static_cast<double>(k));
}

double PolySchedule::ValueAt(double t) const {
  switch (form_) {
    case ScheduleForm::kRational:
      return a_ / (1.0 + b_ * std::pow(t, p_));
    case ScheduleForm::kMonomial:
      return a_ * std::pow(t, p_) + c_;
    case ScheduleForm::kCustom:
      break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

std::optional<PowerEnvelope> PolySchedule::Envelope() const {
  switch (form_) {
    case ScheduleForm::kRational:
      if (b_ > 0.0 && p_ > 0.0) return PowerEnvelope{-p_, a_ / (1.0 + b_), a_ / b_};
      if (b_ > 0.0 && p_ < 0.0) return PowerEnvelope{0.0, a_ / (1.0 + b_), a_};
      return PowerEnvelope{0.0, (*this)(1), (*this)(1)};
    case ScheduleForm::kMonomial:
      if (p_ > 0.0 && a_ > 0.0) return PowerEnvelope{p_, a_, a_ + c_};
      if (p_ < 0.0 && c_ > 0.0) return PowerEnvelope{0.0, c_, a_ + c_};
      if (p_ < 0.0) return PowerEnvelope{p_, a_, a_};
      return PowerEnvelope{0.0, (*this)(1), (*this)(1)};
    case ScheduleForm::kCustom:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<double> PolySchedule::AsymptoticExponent() const {
  if (auto env = Envelope()) return env->exponent;
  return std::nullopt;
}

PolySchedule PolySchedule::Scaled(double factor) const {
  PolySchedule s = *this;
  switch (form_) {
    case ScheduleForm::kRational:
      s.a_ *= factor;
      break;
    case ScheduleForm::kMonomial:
      s.a_ *= factor;
      s.c_ *= factor;
      break;
    case ScheduleForm::kCustom:
      s.scale_ *= factor;
      break;
  }
  return s;
}

std::string PolySchedule::DebugString() const {
  switch (form_) {
    case ScheduleForm::kRational:
      return absl::StrCat(a_, "/(1+", b_, "*k^", p_, ")");
    case ScheduleForm::kMonomial:
      return absl::StrCat(a_, "*k^", p_, "+", c_);
    case ScheduleForm::kCustom:
      return absl::StrCat("custom(", name_, ")");
  }
  return "?";
}

double EstimateExponentNumerically(const PolySchedule& s) {
  constexpr int64_t kProbe = int64_t{1} << 20;
  const double lo = s(kProbe);
  const double hi = s(2 * kProbe);
  if (hi <= 0.0 || lo <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log2(hi / lo);
}

SummabilityClass Classify(const PolySchedule& s) {
  SummabilityClass out;
  if (auto e = s.AsymptoticExponent()) {
    out.exponent = *e;
  } else {
    out.exponent = EstimateExponentNumerically(s);
    out.decided_by = DecidedBy::kNumericHeuristic;
  }
  out.sum_diverges = !PowerSeriesConverges(out.exponent);
  out.square_summable = PowerSeriesConverges(2.0 * out.exponent);
  return out;
}

bool ConditionReport::all_pass() const {
  for (const ConditionVerdict& c : conditions) {
    if (!c.pass) return false;
  }
  return true;
}

std::string ConditionReport::FailureSummary() const {
  std::vector<std::string> failed;
  for (const ConditionVerdict& c : conditions) {
    if (!c.pass) failed.push_back(c.name);
  }
  return absl::StrJoin(failed, "; ");
}

namespace {

struct Exponents {
  std::vector<double> values;
  DecidedBy decided_by = DecidedBy::kExponentRule;
};

Exponents ExponentsOf(std::initializer_list<const PolySchedule*> schedules) {
  Exponents out;
  for (const PolySchedule* s : schedules) {
    const SummabilityClass cls = Classify(*s);
    if (cls.decided_by == DecidedBy::kNumericHeuristic) {
      out.decided_by = DecidedBy::kNumericHeuristic;
    }
    out.values.push_back(cls.exponent);
  }
  return out;
}

// A NaN exponent (e.g. -inf - -inf from two super-polynomial sequences)
// cannot be decided either way and is reported as a failure.
ConditionVerdict Finite(std::string name, double exponent) {
  return {std::move(name), !std::isnan(exponent) && PowerSeriesConverges(exponent),
          exponent};
}

ConditionVerdict Divergent(std::string name, double exponent) {
  return {std::move(name), !std::isnan(exponent) && !PowerSeriesConverges(exponent),
          exponent};
}

ConditionReport MakeReport(const Exponents& e,
                           std::vector<ConditionVerdict> verdicts) {
  ConditionReport report;
  report.conditions = std::move(verdicts);
  report.decided_by = e.decided_by;
  report.inconclusive = e.decided_by == DecidedBy::kNumericHeuristic;
  return report;
}

}  // namespace

ConditionReport CheckConvergenceConditions(const PolySchedule& lambda,
                                           const PolySchedule& gamma) {
  const Exponents e = ExponentsOf({&lambda, &gamma});
  const double el = e.values[0];
  const double eg = e.values[1];
  return MakeReport(e, {Divergent("sum gamma diverges", eg),
                        Divergent("sum lambda diverges", el),
                        Finite("sum gamma^2 finite", 2.0 * eg),
                        Finite("sum lambda^2/gamma finite", 2.0 * el - eg)});
}

ConditionReport CheckNoiseCondition(const PolySchedule& gamma,
                                    const PolySchedule& sigma) {
  const Exponents e = ExponentsOf({&gamma, &sigma});
  return MakeReport(
      e, {Finite("sum gamma^2 sigma^2 finite",
                 2.0 * e.values[0] + 2.0 * e.values[1])});
}

ConditionReport CheckStochasticCondition(const PolySchedule& lambda,
                                         const PolySchedule& mu) {
  const Exponents e = ExponentsOf({&lambda, &mu});
  return MakeReport(
      e, {Finite("sum (lambda mu)^2 finite",
                 2.0 * e.values[0] + 2.0 * e.values[1])});
}

}  // namespace dpnash
