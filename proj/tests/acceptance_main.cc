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

// Acceptance checks for the desk-scale experiment. Prints one PASS/FAIL line
// per criterion and exits non-zero when any of them fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "absl/strings/str_format.h"
#include "dpnash/cournot.h"
#include "dpnash/game_core.h"
#include "dpnash/harness.h"
#include "dpnash/network.h"
#include "dpnash/privacy.h"
#include "dpnash/random.h"
#include "dpnash/schedules.h"
#include "dpnash/solver.h"

namespace dpnash {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

absl::StatusOr<ExperimentConfig> Config(const std::string& name) {
  return LoadConfig(fs::path(DPNASH_SOURCE_DIR) / "configs" / (name + ".json"));
}

const SummaryRow* RowAt(const std::vector<SummaryRow>& rows, int64_t k) {
  for (const SummaryRow& r : rows) {
    if (r.k == k) return &r;
  }
  return nullptr;
}

Outcome Conservation() {
  absl::StatusOr<ExperimentConfig> config = Config("dp_weakening");
  if (!config.ok()) return {false, std::string(config.status().message())};
  const Clock::time_point start = Clock::now();
  absl::StatusOr<ExperimentResult> result = RunExperiment(*config, {1, false});
  const double elapsed = Seconds(start);
  if (!result.ok()) return {false, std::string(result.status().message())};
  if (!result->all_ok()) return {false, "a run failed"};
  double worst = 0.0;
  for (const RunRecord& r : result->records) {
    const TrajectoryMetrics& m = r.metrics;
    for (size_t t = 0; t < m.size(); ++t) {
      worst = std::max(worst, m.conservation_residual[t] / (1.0 + m.aggregate_norm[t]));
    }
  }
  return {worst <= 1e-8 && elapsed < 120.0 && result->records.size() == 10,
          absl::StrFormat("max residual/(1+|sum x|) = %.3g over %d runs, %.1f s",
                          worst, result->records.size(), elapsed)};
}

Outcome OracleEquivalence() {
  absl::StatusOr<ExperimentConfig> config = Config("two_firm");
  if (!config.ok()) return {false, std::string(config.status().message())};
  absl::StatusOr<PreparedExperiment> prepared = Prepare(*config);
  if (!prepared.ok()) return {false, std::string(prepared.status().message())};
  double centralized = 0.0;
  for (int i = 0; i < 2; ++i) {
    centralized = std::max(centralized, std::abs(prepared->x_star.stacked()[i] - 2.0));
  }
  absl::StatusOr<ExperimentResult> result = RunExperiment(*config, {1, false});
  if (!result.ok()) return {false, std::string(result.status().message())};
  if (!result->all_ok()) return {false, "run failed"};
  // The run reports ‖x - x*‖ against the solver's x*; add its own error.
  const double distributed = result->records[0].final_gap() + centralized * std::sqrt(2.0);
  return {centralized <= 1e-6 && distributed <= 1e-3 &&
              config->run.iterations == 10000,
          absl::StrFormat("centralized error %.3g, distributed error <= %.3g",
                          centralized, distributed)};
}

Outcome Convergence(const std::string& name, double fraction) {
  absl::StatusOr<ExperimentConfig> config = Config(name);
  if (!config.ok()) return {false, std::string(config.status().message())};
  absl::StatusOr<ExperimentResult> result = RunExperiment(*config, {1, false});
  if (!result.ok()) return {false, std::string(result.status().message())};
  if (!result->all_ok()) return {false, "a run failed"};
  absl::StatusOr<std::vector<SummaryRow>> rows = Summarize(result->records);
  if (!rows.ok()) return {false, std::string(rows.status().message())};
  const SummaryRow* first = RowAt(*rows, 0);
  const SummaryRow* mid = RowAt(*rows, 1000);
  const SummaryRow* last = RowAt(*rows, 20000);
  if (first == nullptr || mid == nullptr || last == nullptr) {
    return {false, "missing recorded iterations 0, 1000 or 20000"};
  }
  return {last->gap_median < fraction * first->gap_median &&
              last->gap_median < mid->gap_median && last->runs == 10,
          absl::StrFormat("median gap %.4g at k=0, %.4g at k=1000, %.4g at k=20000",
                          first->gap_median, mid->gap_median, last->gap_median)};
}

Outcome Accountant() {
  const PolySchedule lambda = *PolySchedule::Monomial(1.0, -1.0);
  const PolySchedule shape = *PolySchedule::Monomial(1.0, 0.3);
  absl::StatusOr<double> phi = RatioSeriesSum(lambda, shape, 1);
  if (!phi.ok()) return {false, std::string(phi.status().message())};
  bool pass = std::abs(*phi - 3.93) <= 0.01;
  std::string detail = absl::StrFormat("phi = %.6f", *phi);
  for (double eps : {0.5, 1.0, 10.0}) {
    absl::StatusOr<NoiseCalibration> cal = CalibrateNoise(lambda, shape, eps, 1.0, 1);
    if (!cal.ok()) return {false, std::string(cal.status().message())};
    absl::StatusOr<BudgetReport> b = CumulativeBudget(lambda, cal->nu, 1.0, 1000000, 1);
    if (!b.ok()) return {false, std::string(b.status().message())};
    const double total = b->partial + b->tail_bound;
    pass = pass && b->partial <= eps && std::abs(total - eps) <= 1e-3;
    detail += absl::StrFormat("; eps %g: partial %.6f, partial+tail %.6f", eps,
                              b->partial, total);
  }
  return {pass, detail};
}

Outcome Sensitivity() {
  RandomEngine rng = MakeStream({2024, ChannelId(StreamChannel::kProbe)});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int failures = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int m = 2 + t % 9;
    const int n = 1 + t % 5;
    CournotOptions options;
    options.general_quadratic_cost = t % 2 == 1;
    absl::StatusOr<CournotInstance> a = BuildCournot(t, m, n, {}, options);
    if (!a.ok()) return {false, std::string(a.status().message())};
    // Adjacent game: firm i gets a fresh cost function, same box.
    CournotInstance b = *a;
    const int i = static_cast<int>(unit(rng) * m);
    Eigen::MatrixXd g = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return unit(rng); });
    b.quadratic_cost[i] = (1.0 + 9.0 * unit(rng)) * Eigen::MatrixXd::Identity(n, n) +
                          g * g.transpose() / n;
    for (int j = 0; j < n; ++j) b.linear_cost[i][j] = 1.0 + 5.0 * unit(rng);
    absl::StatusOr<GameSpec> ga = ToGameSpec(*a);
    absl::StatusOr<GameSpec> gb = ToGameSpec(b);
    if (!ga.ok() || !gb.ok()) return {false, "instance conversion failed"};
    SolverState state;
    state.x = SampleUniformProfile(*ga, rng).Blocks();
    state.v = SampleUniformProfile(*ga, rng).Blocks();
    const double lambda = 0.5 * unit(rng);
    const double c_bar = 0.5 + 4.5 * unit(rng);
    absl::StatusOr<SensitivityProbeResult> r =
        OneStepSensitivityProbe(*ga, *gb, i, state, lambda, c_bar);
    if (!r.ok()) return {false, std::string(r.status().message())};
    if (!r->pass) ++failures;
    if (r->bound > 0.0) worst_ratio = std::max(worst_ratio, r->measured / r->bound);
  }
  return {failures == 0,
          absl::StrFormat("%d failures in 1000 pairs, max measured/bound %.4f",
                          failures, worst_ratio)};
}

double LaplaceCdf(double x, double nu) {
  return x < 0.0 ? 0.5 * std::exp(x / nu) : 1.0 - 0.5 * std::exp(-x / nu);
}

Outcome Sampler() {
  // Asymptotic Kolmogorov critical value at the 1% level.
  constexpr double kKsCritical = 1.62762;
  bool pass = true;
  std::string detail;
  uint64_t stream_id = 0;
  for (double nu : {0.5, 1.0, 5.0}) {
    RandomEngine rng = MakeStream({7, ChannelId(StreamChannel::kPrivacyNoise), ++stream_id});
    std::vector<double> xs(100000);
    for (double& x : xs) x = SampleLaplaceScalar(nu, rng);
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (size_t t = 0; t < xs.size(); ++t) {
      const double f = LaplaceCdf(xs[t], nu);
      d = std::max({d, (t + 1) / n - f, f - t / n});
    }
    const double ks = d * std::sqrt(n);

    double sum = 0.0;
    double sum_sq = 0.0;
    const int big = 1000000;
    for (int t = 0; t < big; ++t) {
      const double x = SampleLaplaceScalar(nu, rng);
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / big;
    const double var = (sum_sq - big * mean * mean) / (big - 1);
    const double rel = var / (2.0 * nu * nu) - 1.0;
    pass = pass && ks < kKsCritical && std::abs(rel) <= 0.025;
    detail += absl::StrFormat("%snu %g: sqrt(n)*D = %.3f, var/2nu^2 - 1 = %+.4f",
                              detail.empty() ? "" : "; ", nu, ks, rel);
  }
  return {pass, detail};
}

Outcome Comparative() {
  std::vector<ExperimentConfig> configs;
  for (const char* name : {"dp_weakening", "baseline_fixed", "baseline_geometric"}) {
    absl::StatusOr<ExperimentConfig> c = Config(name);
    if (!c.ok()) return {false, std::string(c.status().message())};
    configs.push_back(*c);
  }
  absl::StatusOr<ComparisonTable> table = CompareAlgorithms(configs, {1, false});
  if (!table.ok()) return {false, std::string(table.status().message())};
  const AlgorithmColumn& dp = table->columns[0];
  const AlgorithmColumn& fixed = table->columns[1];
  const AlgorithmColumn& geo = table->columns[2];
  const bool noise_matched =
      configs[0].nu.has_value() && configs[1].nu.has_value() &&
      configs[0].nu->DebugString() == configs[1].nu->DebugString();
  const bool eps_matched = std::abs(dp.eps_guarantee - geo.eps_guarantee) <=
                           1e-9 * dp.eps_guarantee;
  return {dp.all_ok && fixed.all_ok && geo.all_ok && noise_matched && eps_matched &&
              dp.final_gap_median < geo.final_gap_median &&
              dp.final_gap_median < fixed.final_gap_median,
          absl::StrFormat("median final gap: dp_weakening %.4g, baseline_fixed %.4g, "
                          "baseline_geometric %.4g (eps %.4f vs %.4f)",
                          dp.final_gap_median, fixed.final_gap_median,
                          geo.final_gap_median, dp.eps_guarantee, geo.eps_guarantee)};
}

// Dyadic block ratio (S(H) - S(H/2)) / (S(H/2) - S(H/4)). Blocks of k^e
// shrink by 2^(e+1): below one for a convergent series, one or more for a
// divergent one.
double BlockRatio(const std::function<double(double)>& term, int64_t horizon) {
  auto block = [&](int64_t from, int64_t to) {
    double s = 0.0;
    for (int64_t k = to; k >= from; --k) s += term(static_cast<double>(k));
    return s;
  };
  return block(horizon / 2 + 1, horizon) / block(horizon / 4 + 1, horizon / 2);
}

Outcome Validator() {
  const PolySchedule lambda = *PolySchedule::Rational(0.1, 0.1, 1.0);
  struct Case {
    double gamma_p;
    bool expected;
  };
  bool pass = true;
  std::string detail;
  for (const Case& c : {Case{0.9, true}, Case{1.0, false}, Case{0.4, false}}) {
    const PolySchedule gamma = *PolySchedule::Rational(1.0, 0.1, c.gamma_p);
    const ConditionReport report = CheckConvergenceConditions(lambda, gamma);
    const std::vector<std::function<double(double)>> terms = {
        [&](double k) { return gamma.ValueAt(k); },
        [&](double k) { return lambda.ValueAt(k); },
        [&](double k) { return std::pow(gamma.ValueAt(k), 2); },
        [&](double k) { return std::pow(lambda.ValueAt(k), 2) / gamma.ValueAt(k); },
    };
    // Conditions 0 and 1 ask for divergence, 2 and 3 for convergence.
    bool confirmed = report.conditions.size() == 4 && !report.inconclusive;
    for (size_t t = 0; confirmed && t < 4; ++t) {
      const double ratio = BlockRatio(terms[t], 1000000);
      const bool converges = ratio < 0.98;
      const bool diverges = ratio > 0.995;
      const bool want_divergent = t < 2;
      const bool holds = want_divergent ? diverges : converges;
      confirmed = (converges || diverges) && holds == report.conditions[t].pass;
    }
    pass = pass && confirmed && report.all_pass() == c.expected;
    detail += absl::StrFormat("%sgamma~k^-%g: %s%s", detail.empty() ? "" : "; ",
                              c.gamma_p, report.all_pass() ? "pass" : "fail",
                              confirmed ? " (confirmed)" : " (NOT confirmed)");
  }
  return {pass, detail};
}

double RawCost(const CournotInstance& c, int firm, const std::vector<Vector>& x) {
  double cost = x[firm].dot(c.quadratic_cost[firm] * x[firm]);
  for (int j = 0; j < c.num_markets; ++j) {
    cost += c.linear_cost[firm][j] * x[firm][j];
    if (!c.participates(firm, j)) continue;
    double supply = 0.0;
    for (int l = 0; l < c.num_firms; ++l) {
      if (c.participates(l, j)) supply += x[l][j];
    }
    cost -= x[firm][j] * (c.price_intercept[j] - c.price_slope[j] * supply);
  }
  return cost;
}

Outcome GradientFidelity() {
  RandomEngine rng = MakeStream({10, ChannelId(StreamChannel::kProbe)});
  std::uniform_real_distribution<double> interior(0.05, 0.95);
  double worst = 0.0;
  int points = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    CournotOptions options;
    options.general_quadratic_cost = seed % 2 == 1;
    absl::StatusOr<CournotInstance> c = BuildCournot(2024 + seed, 20, 7, {}, options);
    if (!c.ok()) return {false, std::string(c.status().message())};
    for (int p = 0; p < 10; ++p, ++points) {
      std::vector<Vector> x;
      for (int i = 0; i < c->num_firms; ++i) {
        Vector xi(c->num_markets);
        for (int j = 0; j < c->num_markets; ++j) {
          xi[j] = c->participates(i, j) ? interior(rng) * c->capacity[i][j] : 0.0;
        }
        x.push_back(xi);
      }
      Vector u = Vector::Zero(c->num_markets);
      for (const Vector& xi : x) u += xi / c->num_firms;
      for (int i = 0; i < c->num_firms; ++i) {
        absl::StatusOr<Vector> g = CournotPseudoGradient(*c, i, x[i], u);
        if (!g.ok()) return {false, std::string(g.status().message())};
        Vector fd(c->num_markets);
        for (int j = 0; j < c->num_markets; ++j) {
          const double h = 1e-4;
          std::vector<Vector> plus = x;
          std::vector<Vector> minus = x;
          plus[i][j] += h;
          minus[i][j] -= h;
          fd[j] = (RawCost(*c, i, plus) - RawCost(*c, i, minus)) / (2.0 * h);
        }
        const double rel =
            (*g - fd).lpNorm<Eigen::Infinity>() / std::max(1.0, fd.lpNorm<Eigen::Infinity>());
        worst = std::max(worst, rel);
      }
    }
  }
  return {worst <= 1e-6 && points == 100,
          absl::StrFormat("max relative error %.3g over %d points", worst, points)};
}

int Main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"conservation invariant", Conservation},
      {"oracle equivalence", OracleEquivalence},
      {"convergence under privacy noise", [] { return Convergence("dp_weakening", 0.10); }},
      {"stochastic gradients",
       [] { return Convergence("dp_weakening_stochastic", 0.15); }},
      {"privacy accountant", Accountant},
      {"sensitivity bound", Sensitivity},
      {"laplace sampler", Sampler},
      {"comparative accuracy", Comparative},
      {"schedule validator", Validator},
      {"gradient fidelity", GradientFidelity},
  };
  int failed = 0;
  for (size_t c = 0; c < criteria.size(); ++c) {
    const Clock::time_point start = Clock::now();
    const Outcome outcome = criteria[c].check();
    if (!outcome.pass) ++failed;
    std::printf("criterion %zu %s: %s (%s) [%.1f s]\n", c + 1,
                outcome.pass ? "PASS" : "FAIL", criteria[c].name,
                outcome.detail.c_str(), Seconds(start));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace dpnash

int main() { return dpnash::Main(); }
