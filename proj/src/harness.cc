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

#include "dpnash/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>
#include <utility>

#include <openssl/evp.h>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "dpnash/privacy.h"

namespace dpnash {
namespace {

using nlohmann::json;

absl::Status FieldError(const std::string& path, const std::string& message) {
  return absl::InvalidArgumentError(
      absl::StrCat("config field '", path, "': ", message));
}

std::string Join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : absl::StrCat(parent, ".", key);
}

absl::StatusOr<const json*> Child(const json& object, const std::string& parent,
                                  const std::string& key, bool required) {
  if (!object.is_object()) return FieldError(parent, "must be an object");
  auto it = object.find(key);
  if (it == object.end()) {
    if (required) return FieldError(Join(parent, key), "is required");
    return nullptr;
  }
  return &*it;
}

absl::StatusOr<double> GetNumber(const json& object, const std::string& parent,
                                 const std::string& key,
                                 std::optional<double> fallback = std::nullopt) {
  absl::StatusOr<const json*> node = Child(object, parent, key, !fallback);
  if (!node.ok()) return node.status();
  if (*node == nullptr) return *fallback;
  if (!(*node)->is_number()) {
    return FieldError(Join(parent, key), "must be a number");
  }
  const double value = (*node)->get<double>();
  if (!std::isfinite(value)) return FieldError(Join(parent, key), "must be finite");
  return value;
}

absl::StatusOr<int64_t> GetInteger(const json& object,
                                   const std::string& parent,
                                   const std::string& key,
                                   std::optional<int64_t> fallback = std::nullopt) {
  absl::StatusOr<const json*> node = Child(object, parent, key, !fallback);
  if (!node.ok()) return node.status();
  if (*node == nullptr) return *fallback;
  if (!(*node)->is_number_integer()) {
    return FieldError(Join(parent, key), "must be an integer");
  }
  return (*node)->get<int64_t>();
}

absl::StatusOr<PolySchedule> ParseSchedule(const json& node,
                                           const std::string& path) {
  if (!node.is_object()) return FieldError(path, "must be a schedule object");
  absl::StatusOr<const json*> form_node = Child(node, path, "form", true);
  if (!form_node.ok()) return form_node.status();
  if (!(*form_node)->is_string()) {
    return FieldError(Join(path, "form"), "must be a string");
  }
  const std::string form = (*form_node)->get<std::string>();
  absl::StatusOr<PolySchedule> schedule =
      absl::InvalidArgumentError("unset");
  if (form == "rational") {
    absl::StatusOr<double> a = GetNumber(node, path, "a");
    absl::StatusOr<double> b = GetNumber(node, path, "b");
    absl::StatusOr<double> p = GetNumber(node, path, "p");
    for (const auto* s : {&a, &b, &p}) {
      if (!s->ok()) return s->status();
    }
    schedule = PolySchedule::Rational(*a, *b, *p);
  } else if (form == "monomial") {
    absl::StatusOr<double> a = GetNumber(node, path, "a");
    absl::StatusOr<double> p = GetNumber(node, path, "p");
    absl::StatusOr<double> c = GetNumber(node, path, "c", 0.0);
    for (const auto* s : {&a, &p, &c}) {
      if (!s->ok()) return s->status();
    }
    schedule = PolySchedule::Monomial(*a, *p, *c);
  } else if (form == "constant") {
    absl::StatusOr<double> v = GetNumber(node, path, "value");
    if (!v.ok()) return v.status();
    if (!(*v > 0.0)) return FieldError(Join(path, "value"), "must be positive");
    schedule = PolySchedule::Constant(*v);
  } else {
    return FieldError(Join(path, "form"),
                      absl::StrCat("unknown form '", form,
                                   "' (expected rational, monomial or constant)"));
  }
  if (!schedule.ok()) return FieldError(path, std::string(schedule.status().message()));
  return schedule;
}

absl::Status ParseGame(const json& doc, const std::filesystem::path& base,
                       GameSourceConfig& game) {
  absl::StatusOr<const json*> node = Child(doc, "", "game", true);
  if (!node.ok()) return node.status();
  const json& g = **node;
  if (!g.is_object()) return FieldError("game", "must be an object");
  int sources = 0;
  for (const char* key : {"cournot", "instance_file", "toy"}) {
    sources += g.contains(key) ? 1 : 0;
  }
  if (sources != 1) {
    return FieldError("game",
                      "needs exactly one of 'cournot', 'instance_file', 'toy'");
  }
  if (g.contains("cournot")) {
    const json& c = g["cournot"];
    game.kind = GameSourceConfig::Kind::kCournot;
    absl::StatusOr<int64_t> seed = GetInteger(c, "game.cournot", "seed");
    absl::StatusOr<int64_t> firms = GetInteger(c, "game.cournot", "firms", 20);
    absl::StatusOr<int64_t> markets = GetInteger(c, "game.cournot", "markets", 7);
    absl::StatusOr<double> density =
        GetNumber(c, "game.cournot", "participation_density", 0.4);
    for (const auto* s : {&seed, &firms, &markets}) {
      if (!s->ok()) return s->status();
    }
    if (!density.ok()) return density.status();
    if (*firms < 1 || *markets < 1) {
      return FieldError("game.cournot", "firms and markets must be >= 1");
    }
    if (!(*density > 0.0 && *density <= 1.0)) {
      return FieldError("game.cournot.participation_density",
                        "must lie in (0, 1]");
    }
    game.seed = static_cast<uint64_t>(*seed);
    game.num_firms = static_cast<int>(*firms);
    game.num_markets = static_cast<int>(*markets);
    game.participation_density = *density;
    if (c.contains("general_quadratic_cost")) {
      if (!c["general_quadratic_cost"].is_boolean()) {
        return FieldError("game.cournot.general_quadratic_cost",
                          "must be a boolean");
      }
      game.general_quadratic_cost = c["general_quadratic_cost"].get<bool>();
    }
  } else if (g.contains("instance_file")) {
    if (!g["instance_file"].is_string()) {
      return FieldError("game.instance_file", "must be a path string");
    }
    game.kind = GameSourceConfig::Kind::kInstanceFile;
    std::filesystem::path file = g["instance_file"].get<std::string>();
    game.instance_file = file.is_absolute() ? file : base / file;
  } else {
    const json& t = g["toy"];
    game.kind = GameSourceConfig::Kind::kToy;
    absl::StatusOr<int64_t> firms = GetInteger(t, "game.toy", "firms");
    if (!firms.ok()) return firms.status();
    if (*firms < 1) return FieldError("game.toy.firms", "must be >= 1");
    game.toy.num_firms = static_cast<int>(*firms);
    struct {
      const char* key;
      double* target;
      double fallback;
    } fields[] = {{"q_quad", &game.toy.q_quad, 1.0},
                  {"q_lin", &game.toy.q_lin, 0.0},
                  {"chi", &game.toy.chi, 1.0},
                  {"p_bar", &game.toy.p_bar, 10.0},
                  {"capacity", &game.toy.capacity, 10.0}};
    for (const auto& f : fields) {
      absl::StatusOr<double> v = GetNumber(t, "game.toy", f.key, f.fallback);
      if (!v.ok()) return v.status();
      *f.target = *v;
    }
  }
  return absl::OkStatus();
}

absl::Status ParseGraph(const json& doc, GraphConfig& graph) {
  absl::StatusOr<const json*> node = Child(doc, "", "graph", true);
  if (!node.ok()) return node.status();
  const json& g = **node;
  if (!g.is_object()) return FieldError("graph", "must be an object");
  int sources = 0;
  for (const char* key : {"generator", "edges", "kind"}) {
    sources += g.contains(key) ? 1 : 0;
  }
  if (sources != 1) {
    return FieldError("graph", "needs exactly one of 'generator', 'edges', 'kind'");
  }
  if (g.contains("generator")) {
    graph.kind = GraphConfig::Kind::kGenerator;
    absl::StatusOr<int64_t> seed = GetInteger(g["generator"], "graph.generator", "seed");
    absl::StatusOr<double> p = GetNumber(g["generator"], "graph.generator",
                                         "extra_edge_probability", 0.1);
    if (!seed.ok()) return seed.status();
    if (!p.ok()) return p.status();
    if (!(*p >= 0.0 && *p <= 1.0)) {
      return FieldError("graph.generator.extra_edge_probability",
                        "must lie in [0, 1]");
    }
    graph.seed = static_cast<uint64_t>(*seed);
    graph.extra_edge_probability = *p;
  } else if (g.contains("edges")) {
    graph.kind = GraphConfig::Kind::kEdges;
    const json& edges = g["edges"];
    if (!edges.is_array()) return FieldError("graph.edges", "must be an array");
    for (const json& e : edges) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        return FieldError("graph.edges", "entries must be [i, j] integer pairs");
      }
      graph.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  } else {
    const std::string kind = g["kind"].is_string() ? g["kind"].get<std::string>() : "";
    if (kind == "ring") {
      graph.kind = GraphConfig::Kind::kRing;
    } else if (kind == "path") {
      graph.kind = GraphConfig::Kind::kPath;
    } else if (kind == "complete") {
      graph.kind = GraphConfig::Kind::kComplete;
    } else {
      return FieldError("graph.kind", "must be 'ring', 'path' or 'complete'");
    }
  }
  if (g.contains("rule")) {
    const json& rule = g["rule"];
    if (rule.is_string() && rule.get<std::string>() == "metropolis") {
      graph.rule = WeightRule::Metropolis();
    } else if (rule.is_object() && rule.contains("uniform")) {
      absl::StatusOr<double> w = GetNumber(rule, "graph.rule", "uniform");
      if (!w.ok()) return w.status();
      if (!(*w > 0.0)) return FieldError("graph.rule.uniform", "must be positive");
      graph.rule = WeightRule::Uniform(*w);
    } else {
      return FieldError("graph.rule",
                        "must be \"metropolis\" or {\"uniform\": w}");
    }
  }
  return absl::OkStatus();
}

absl::Status ParseRun(const json& doc, RunConfig& run) {
  absl::StatusOr<const json*> node = Child(doc, "", "run", true);
  if (!node.ok()) return node.status();
  const json& r = **node;
  absl::StatusOr<int64_t> iterations = GetInteger(r, "run", "iterations", 20000);
  absl::StatusOr<int64_t> record_every = GetInteger(r, "run", "record_every", 100);
  absl::StatusOr<int64_t> master = GetInteger(r, "run", "master_seed", 1);
  absl::StatusOr<int64_t> first = GetInteger(r, "run", "first_index", 0);
  for (const auto* s : {&iterations, &record_every, &master, &first}) {
    if (!s->ok()) return s->status();
  }
  if (*iterations < 0) return FieldError("run.iterations", "must be >= 0");
  if (*record_every < 1) return FieldError("run.record_every", "must be >= 1");
  if (*first < 0) return FieldError("run.first_index", "must be >= 0");
  run.iterations = *iterations;
  run.record_every = *record_every;
  run.master_seed = static_cast<uint64_t>(*master);
  run.first_index = *first;
  run.seeds.clear();
  const bool has_list = r.contains("seeds");
  const bool has_count = r.contains("seed_count");
  if (has_list == has_count) {
    return FieldError("run.seeds", "give exactly one of 'seeds' or 'seed_count'");
  }
  if (has_list) {
    if (!r["seeds"].is_array()) return FieldError("run.seeds", "must be an array");
    for (const json& s : r["seeds"]) {
      if (!s.is_number_integer() || s.get<int64_t>() < 0) {
        return FieldError("run.seeds", "entries must be non-negative integers");
      }
      run.seeds.push_back(s.get<uint64_t>());
    }
  } else {
    absl::StatusOr<int64_t> count = GetInteger(r, "run", "seed_count");
    if (!count.ok()) return count.status();
    for (int64_t s = 0; s < *count; ++s) run.seeds.push_back(static_cast<uint64_t>(s));
  }
  if (run.seeds.empty()) return FieldError("run.seeds", "must not be empty");
  std::vector<uint64_t> sorted = run.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    return FieldError("run.seeds", "must be distinct");
  }
  return absl::OkStatus();
}

void AttachVerdicts(const std::string& scope, const ConditionReport& report,
                    ExperimentConfig& config) {
  for (const ConditionVerdict& v : report.conditions) {
    config.checks.push_back(absl::StrFormat("%s %s: %s (term exponent %g)",
                                            v.pass ? "PASS" : "FAIL", scope,
                                            v.name, v.exponent));
    if (!v.pass) {
      config.warnings.push_back(absl::StrCat(scope, ": ", v.name, " fails"));
    }
  }
  if (report.inconclusive) {
    config.warnings.push_back(
        absl::StrCat(scope, ": verdict rests on a numeric estimate"));
  }
}

absl::Status ValidateAndCheck(ExperimentConfig& config) {
  const int64_t first = config.run.first_index;
  const bool geometric = config.algorithm == AlgorithmVariant::kBaselineGeometric;
  if (!geometric && first < config.lambda.first_index()) {
    return FieldError("run.first_index",
                      absl::StrCat("lambda is undefined at k = ", first));
  }
  if (config.algorithm == AlgorithmVariant::kDpWeakening &&
      first < config.gamma.first_index()) {
    return FieldError("run.first_index",
                      absl::StrCat("gamma is undefined at k = ", first));
  }
  if (config.nu.has_value() && first < config.nu->first_index()) {
    return FieldError("run.first_index",
                      absl::StrCat("nu is undefined at k = ", first));
  }
  if (geometric && !(config.baseline.q > 0.0 && config.baseline.q < 1.0)) {
    return FieldError("baseline.q", "must lie in (0, 1)");
  }
  if (geometric && !(config.baseline.lambda0 > 0.0)) {
    return FieldError("baseline.lambda0", "must be positive");
  }

  config.checks.clear();
  config.warnings.clear();
  if (config.algorithm == AlgorithmVariant::kDpWeakening) {
    AttachVerdicts("step sizes",
                   CheckConvergenceConditions(config.lambda, config.gamma),
                   config);
    if (config.nu.has_value()) {
      AttachVerdicts("noise", CheckNoiseCondition(config.gamma, *config.nu),
                     config);
    }
  }
  if (config.oracle.mode == GradientOracle::Mode::kAdditiveNoise &&
      config.oracle.mu.has_value() && !geometric) {
    AttachVerdicts("oracle",
                   CheckStochasticCondition(config.lambda, *config.oracle.mu),
                   config);
  }
  if (config.nu.has_value() && !geometric) {
    absl::StatusOr<BudgetReport> budget =
        CumulativeBudget(config.lambda, *config.nu, config.privacy.c_bar,
                         std::max<int64_t>(first, 1), std::max<int64_t>(first, 1));
    if (budget.ok()) {
      config.checks.push_back(absl::StrCat(
          budget->finite ? "PASS" : "FAIL",
          " privacy: sum lambda/nu finite"));
      if (!budget->finite) {
        config.warnings.push_back(
            "privacy: sum lambda/nu diverges, the budget is unbounded");
      }
    }
  }
  if (config.privacy.eps_target.has_value() && !geometric) {
    PolySchedule shape = config.privacy.nu_shape.value_or(
        *PolySchedule::Monomial(1.0, 0.3));
    absl::StatusOr<double> phi = RatioSeriesSum(config.lambda, shape, first);
    if (!phi.ok()) {
      return absl::FailedPreconditionError(absl::StrCat(
          "config field 'privacy.eps_target': ", phi.status().message()));
    }
  }
  return absl::OkStatus();
}

void Rewrite(ExperimentConfig& config) {
  json& run = config.document["run"];
  run.erase("seed_count");
  run["seeds"] = config.run.seeds;
  run["iterations"] = config.run.iterations;
  run["record_every"] = config.run.record_every;
  run["master_seed"] = config.run.master_seed;
  run["first_index"] = config.run.first_index;
  config.document["output"]["directory"] = config.output.directory.string();
  config.document["output"]["emit_ledger"] = config.output.emit_ledger;
  config.document["label"] = config.label;
}

std::pair<int, int> LineColumn(const std::string& text, size_t byte) {
  int line = 1;
  int column = 1;
  for (size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

}  // namespace

absl::StatusOr<ExperimentConfig> ParseConfig(
    const std::string& text, const std::filesystem::path& base_directory) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, column] = LineColumn(text, e.byte);
    return absl::InvalidArgumentError(absl::StrFormat(
        "config parse error at line %d, column %d: %s", line, column, e.what()));
  }
  if (!doc.is_object()) return FieldError("", "top level must be an object");

  ExperimentConfig config;
  config.base_directory = base_directory;
  try {
    if (auto s = ParseGame(doc, base_directory, config.game); !s.ok()) return s;
    if (auto s = ParseGraph(doc, config.graph); !s.ok()) return s;
    if (auto s = ParseRun(doc, config.run); !s.ok()) return s;

    absl::StatusOr<const json*> alg = Child(doc, "", "algorithm", false);
    if (!alg.ok()) return alg.status();
    if (*alg != nullptr) {
      if (!(*alg)->is_string()) return FieldError("algorithm", "must be a string");
      absl::StatusOr<AlgorithmVariant> variant =
          ParseVariant((*alg)->get<std::string>());
      if (!variant.ok()) {
        return FieldError("algorithm", std::string(variant.status().message()));
      }
      config.algorithm = *variant;
    }
    const bool geometric =
        config.algorithm == AlgorithmVariant::kBaselineGeometric;

    absl::StatusOr<const json*> sched = Child(doc, "", "schedules", !geometric);
    if (!sched.ok()) return sched.status();
    const json empty = json::object();
    const json& s = *sched != nullptr ? **sched : empty;
    if (!geometric) {
      absl::StatusOr<const json*> lam = Child(s, "schedules", "lambda", true);
      if (!lam.ok()) return lam.status();
      absl::StatusOr<PolySchedule> lambda = ParseSchedule(**lam, "schedules.lambda");
      if (!lambda.ok()) return lambda.status();
      config.lambda = *lambda;
    }
    if (config.algorithm == AlgorithmVariant::kDpWeakening) {
      absl::StatusOr<const json*> gam = Child(s, "schedules", "gamma", true);
      if (!gam.ok()) return gam.status();
      absl::StatusOr<PolySchedule> gamma = ParseSchedule(**gam, "schedules.gamma");
      if (!gamma.ok()) return gamma.status();
      config.gamma = *gamma;
    }
    if (s.contains("nu")) {
      absl::StatusOr<PolySchedule> nu = ParseSchedule(s["nu"], "schedules.nu");
      if (!nu.ok()) return nu.status();
      config.nu = *nu;
    }

    if (doc.contains("privacy")) {
      const json& p = doc["privacy"];
      absl::StatusOr<double> c_bar = GetNumber(p, "privacy", "c_bar", 1.0);
      if (!c_bar.ok()) return c_bar.status();
      if (!(*c_bar > 0.0)) return FieldError("privacy.c_bar", "must be positive");
      config.privacy.c_bar = *c_bar;
      if (p.contains("eps_target")) {
        const json& eps = p["eps_target"];
        if (eps.is_string() && eps.get<std::string>() == "match") {
          config.privacy.match_eps = true;
        } else if (eps.is_number() && eps.get<double>() > 0.0 &&
                   std::isfinite(eps.get<double>())) {
          config.privacy.eps_target = eps.get<double>();
        } else {
          return FieldError("privacy.eps_target",
                            "must be a positive number or \"match\"");
        }
      }
      if (p.contains("nu_shape")) {
        absl::StatusOr<PolySchedule> shape =
            ParseSchedule(p["nu_shape"], "privacy.nu_shape");
        if (!shape.ok()) return shape.status();
        config.privacy.nu_shape = *shape;
      }
    }
    if (config.nu.has_value() &&
        (config.privacy.eps_target.has_value() || config.privacy.match_eps)) {
      return FieldError("privacy.eps_target",
                        "is mutually exclusive with an explicit schedules.nu");
    }

    if (doc.contains("oracle")) {
      const json& o = doc["oracle"];
      const std::string mode =
          o.contains("mode") && o["mode"].is_string() ? o["mode"].get<std::string>()
                                                       : "";
      if (mode == "exact") {
        config.oracle.mode = GradientOracle::Mode::kExact;
      } else if (mode == "additive_gaussian") {
        config.oracle.mode = GradientOracle::Mode::kAdditiveNoise;
        if (o.contains("mu")) {
          absl::StatusOr<PolySchedule> mu = ParseSchedule(o["mu"], "oracle.mu");
          if (!mu.ok()) return mu.status();
          config.oracle.mu = *mu;
        } else {
          absl::StatusOr<double> var =
              GetNumber(o, "oracle", "coordinate_variance", 1.0);
          if (!var.ok()) return var.status();
          if (!(*var > 0.0)) {
            return FieldError("oracle.coordinate_variance", "must be positive");
          }
          config.oracle.coordinate_variance = *var;
        }
      } else {
        return FieldError("oracle.mode",
                          "must be \"exact\" or \"additive_gaussian\"");
      }
    }

    if (doc.contains("baseline")) {
      absl::StatusOr<double> l0 =
          GetNumber(doc["baseline"], "baseline", "lambda0", 0.1);
      absl::StatusOr<double> q = GetNumber(doc["baseline"], "baseline", "q", 0.995);
      if (!l0.ok()) return l0.status();
      if (!q.ok()) return q.status();
      config.baseline = {*l0, *q};
    }

    if (doc.contains("output")) {
      const json& o = doc["output"];
      if (o.contains("directory")) {
        if (!o["directory"].is_string()) {
          return FieldError("output.directory", "must be a path string");
        }
        config.output.directory = o["directory"].get<std::string>();
      }
      if (o.contains("emit_ledger")) {
        if (!o["emit_ledger"].is_boolean()) {
          return FieldError("output.emit_ledger", "must be a boolean");
        }
        config.output.emit_ledger = o["emit_ledger"].get<bool>();
      }
    }
    config.label = doc.contains("label") && doc["label"].is_string()
                       ? doc["label"].get<std::string>()
                       : VariantName(config.algorithm);
    if (config.label.empty()) return FieldError("label", "must not be empty");
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("config error: ", e.what()));
  }

  // Oracle μ defaults need the game dimension, known only for generated and
  // toy games; instance files resolve it in Prepare.
  if (config.oracle.mode == GradientOracle::Mode::kAdditiveNoise &&
      !config.oracle.mu.has_value() &&
      config.game.kind != GameSourceConfig::Kind::kInstanceFile) {
    const int d = config.game.kind == GameSourceConfig::Kind::kToy
                      ? 1
                      : config.game.num_markets;
    config.oracle.mu =
        PolySchedule::Constant(std::sqrt(d * config.oracle.coordinate_variance));
  }

  config.document = std::move(doc);
  if (auto s = ValidateAndCheck(config); !s.ok()) return s;
  Rewrite(config);
  return config;
}

absl::StatusOr<ExperimentConfig> LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open config ", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  absl::StatusOr<ExperimentConfig> config =
      ParseConfig(buffer.str(), path.parent_path());
  if (!config.ok()) {
    return absl::Status(config.status().code(),
                        absl::StrCat(path.string(), ": ",
                                     config.status().message()));
  }
  return config;
}

absl::Status ApplyOverrides(ExperimentConfig& config,
                            std::optional<int> seed_count,
                            std::optional<int64_t> iterations,
                            std::optional<std::filesystem::path> output) {
  if (seed_count.has_value()) {
    if (*seed_count < 1) return FieldError("run.seeds", "--seeds must be >= 1");
    config.run.seeds.clear();
    for (int s = 0; s < *seed_count; ++s) config.run.seeds.push_back(s);
  }
  if (iterations.has_value()) {
    if (*iterations < 0) return FieldError("run.iterations", "--iters must be >= 0");
    config.run.iterations = *iterations;
  }
  if (output.has_value()) config.output.directory = *output;
  Rewrite(config);
  return absl::OkStatus();
}

std::string CanonicalConfig(const ExperimentConfig& config) {
  return config.document.dump(2) + "\n";
}

std::string Sha256Hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr);
  std::string out;
  for (unsigned int i = 0; i < length; ++i) absl::StrAppendFormat(&out, "%02x", digest[i]);
  return out;
}

absl::StatusOr<double> BudgetGuarantee(const ExperimentConfig& config,
                                       const PolySchedule& nu) {
  const double c_bar = config.privacy.c_bar;
  const int64_t first = config.run.first_index;
  if (config.algorithm == AlgorithmVariant::kBaselineGeometric) {
    const double q = config.baseline.q;
    double total = 0.0;
    double lambda_k = config.baseline.lambda0 * std::pow(q, static_cast<double>(first));
    for (int64_t k = first; k < first + 100000000; ++k) {
      const double term = 2.0 * c_bar * lambda_k / nu(k);
      total += term;
      if (term < 1e-17 * total) break;
      lambda_k *= q;
    }
    return total;
  }
  absl::StatusOr<double> phi = RatioSeriesSum(config.lambda, nu, first);
  if (!phi.ok()) {
    if (phi.status().code() == absl::StatusCode::kFailedPrecondition) {
      return std::numeric_limits<double>::infinity();
    }
    return phi.status();
  }
  return 2.0 * c_bar * *phi;
}

namespace {

absl::StatusOr<CournotInstance> LoadInstance(const GameSourceConfig& source,
                                             std::optional<DecisionProfile>& x_star) {
  switch (source.kind) {
    case GameSourceConfig::Kind::kCournot: {
      ParticipationSpec participation;
      participation.density = source.participation_density;
      CournotOptions options;
      options.general_quadratic_cost = source.general_quadratic_cost;
      return BuildCournot(source.seed, source.num_firms, source.num_markets,
                          participation, options);
    }
    case GameSourceConfig::Kind::kInstanceFile: {
      std::ifstream in(source.instance_file);
      if (!in) {
        return absl::NotFoundError(absl::StrCat(
            "cannot open instance file ", source.instance_file.string()));
      }
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        return absl::InvalidArgumentError(absl::StrCat(
            "instance file ", source.instance_file.string(), ": ", e.what()));
      }
      absl::StatusOr<LoadedInstance> loaded = InstanceFromJson(doc);
      if (!loaded.ok()) return loaded.status();
      x_star = loaded->x_star;
      return loaded->instance;
    }
    case GameSourceConfig::Kind::kToy: {
      const SymmetricCournotParams& t = source.toy;
      return SymmetricCournot(t.num_firms, t.q_quad, t.q_lin, t.chi, t.p_bar,
                              t.capacity);
    }
  }
  return absl::InternalError("unknown game source");
}

absl::StatusOr<Graph> LoadGraph(const GraphConfig& config, int nodes) {
  switch (config.kind) {
    case GraphConfig::Kind::kGenerator:
      return RandomConnectedGraph(nodes, config.extra_edge_probability,
                                  config.seed);
    case GraphConfig::Kind::kEdges:
      return Graph::FromEdges(nodes, config.edges);
    case GraphConfig::Kind::kRing:
      return RingGraph(nodes);
    case GraphConfig::Kind::kPath:
      return PathGraph(nodes);
    case GraphConfig::Kind::kComplete:
      return CompleteGraph(nodes);
  }
  return absl::InternalError("unknown graph source");
}

absl::StatusOr<std::optional<PolySchedule>> ResolveNoise(
    const ExperimentConfig& config, std::optional<double> match_eps) {
  if (config.nu.has_value()) return config.nu;
  std::optional<double> eps = config.privacy.eps_target;
  if (config.privacy.match_eps) {
    if (!match_eps.has_value()) {
      return absl::FailedPreconditionError(
          "calibration error: eps_target \"match\" needs a reference "
          "configuration with an explicit nu");
    }
    eps = match_eps;
  }
  if (!eps.has_value()) return std::optional<PolySchedule>();
  if (!std::isfinite(*eps)) {
    return absl::FailedPreconditionError(
        "calibration error: the matched budget is unbounded");
  }
  if (config.algorithm == AlgorithmVariant::kBaselineGeometric) {
    absl::StatusOr<double> nu =
        GeometricNoiseScale(config.baseline.lambda0, config.baseline.q, *eps,
                            config.privacy.c_bar);
    if (!nu.ok()) return nu.status();
    return std::optional<PolySchedule>(PolySchedule::Constant(*nu));
  }
  const PolySchedule shape =
      config.privacy.nu_shape.value_or(*PolySchedule::Monomial(1.0, 0.3));
  absl::StatusOr<NoiseCalibration> calibration = CalibrateNoise(
      config.lambda, shape, *eps, config.privacy.c_bar, config.run.first_index);
  if (!calibration.ok()) return calibration.status();
  return std::optional<PolySchedule>(calibration->nu);
}

}  // namespace

absl::StatusOr<PreparedExperiment> Prepare(const ExperimentConfig& config,
                                           std::optional<double> match_eps) {
  std::optional<DecisionProfile> cached;
  absl::StatusOr<CournotInstance> instance = LoadInstance(config.game, cached);
  if (!instance.ok()) return instance.status();
  absl::StatusOr<GameSpec> game = ToGameSpec(*instance);
  if (!game.ok()) return game.status();
  absl::StatusOr<Graph> graph = LoadGraph(config.graph, instance->num_firms);
  if (!graph.ok()) return graph.status();
  absl::StatusOr<WeightMatrix> weights = BuildWeights(*graph, config.graph.rule);
  if (!weights.ok()) return weights.status();

  DecisionProfile x_star;
  if (cached.has_value()) {
    x_star = *cached;
  } else {
    absl::StatusOr<DecisionProfile> solved = SolveCentralized(*game);
    if (!solved.ok()) return solved.status();
    x_star = *std::move(solved);
  }
  absl::StatusOr<std::optional<PolySchedule>> nu = ResolveNoise(config, match_eps);
  if (!nu.ok()) return nu.status();
  double guarantee = 0.0;
  if (nu->has_value()) {
    absl::StatusOr<double> g = BudgetGuarantee(config, **nu);
    if (!g.ok()) return g.status();
    guarantee = *g;
  }
  return PreparedExperiment{*std::move(instance), *std::move(game),
                            *std::move(graph),    *std::move(weights),
                            std::move(x_star),    *std::move(nu),
                            guarantee};
}

double RunRecord::final_gap() const {
  return metrics.equilibrium_gap.empty()
             ? std::numeric_limits<double>::quiet_NaN()
             : metrics.equilibrium_gap.back();
}
double RunRecord::final_consensus_error() const {
  return metrics.consensus_error.empty()
             ? std::numeric_limits<double>::quiet_NaN()
             : metrics.consensus_error.back();
}
double RunRecord::final_conservation_residual() const {
  return metrics.conservation_residual.empty()
             ? std::numeric_limits<double>::quiet_NaN()
             : metrics.conservation_residual.back();
}
double RunRecord::final_eps() const {
  return metrics.eps_spent.empty() ? 0.0 : metrics.eps_spent.back();
}

bool ExperimentResult::all_ok() const {
  return std::all_of(records.begin(), records.end(),
                     [](const RunRecord& r) { return r.ok; });
}

RunRecord ExecuteRun(const ExperimentConfig& config,
                     const PreparedExperiment& prepared, uint64_t seed,
                     const std::string& config_hash,
                     const ExecutionOptions& execution) {
  RunRecord record;
  record.seed = seed;
  record.run_id = absl::StrCat(config.label, "-seed", seed);
  record.config_hash = config_hash;

  const int m = prepared.game.num_players();
  const int d = prepared.game.dimension();
  std::optional<LaplaceNoiseSource> noise;
  std::optional<PrivacyLedger> ledger;
  if (prepared.nu.has_value()) {
    noise.emplace(*prepared.nu, d, m, config.run.master_seed, seed);
    ledger.emplace(config.privacy.c_bar);
  }
  GradientOracle oracle = GradientOracle::Exact();
  if (config.oracle.mode == GradientOracle::Mode::kAdditiveNoise) {
    PolySchedule mu = config.oracle.mu.value_or(
        PolySchedule::Constant(std::sqrt(d * config.oracle.coordinate_variance)));
    oracle = GradientOracle::AdditiveGaussian(mu, m, config.run.master_seed, seed);
  }
  RunOptions options;
  options.variant = config.algorithm;
  options.iterations = config.run.iterations;
  options.record_every = config.run.record_every;
  options.first_index = config.run.first_index;
  options.master_seed = config.run.master_seed;
  options.run_seed = seed;
  options.geometric = config.baseline;

  absl::StatusOr<RunResult> result =
      Run(prepared.game, prepared.weights, config.lambda, config.gamma,
          noise ? &*noise : nullptr, oracle, options, &prepared.x_star,
          ledger ? &*ledger : nullptr);
  if (!result.ok()) {
    record.error = std::string(result.status().message());
    return record;
  }
  record.metrics = std::move(result->metrics);
  record.ok = true;
  if (!execution.write_files) return record;

  const std::filesystem::path dir = config.output.directory;
  record.trajectory_path = dir / absl::StrCat("traj_seed", seed, ".csv");
  std::ofstream traj(record.trajectory_path);
  WriteTrajectoryCsv(record.run_id, record.metrics, traj);
  if (!traj) {
    record.ok = false;
    record.error = absl::StrCat("cannot write ", record.trajectory_path.string());
    return record;
  }
  if (ledger.has_value() && config.output.emit_ledger) {
    record.ledger_path = dir / absl::StrCat("ledger_seed", seed, ".csv");
    std::ofstream out(record.ledger_path);
    ledger->WriteCsv(out);
    if (!out) {
      record.ok = false;
      record.error = absl::StrCat("cannot write ", record.ledger_path.string());
    }
  }
  return record;
}

namespace {

absl::Status WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path.string()));
  return absl::OkStatus();
}

json GraphJson(const PreparedExperiment& prepared) {
  json out;
  out["nodes"] = prepared.graph.num_nodes();
  json edges = json::array();
  for (const auto& [a, b] : prepared.graph.edges()) edges.push_back({a, b});
  out["edges"] = edges;
  json rows = json::array();
  const Eigen::MatrixXd& l = prepared.weights.entries();
  for (Eigen::Index r = 0; r < l.rows(); ++r) {
    std::vector<double> row(l.cols());
    for (Eigen::Index c = 0; c < l.cols(); ++c) row[c] = l(r, c);
    rows.push_back(row);
  }
  out["weights"] = rows;
  return out;
}

std::string Num(double value) { return absl::StrFormat("%.17g", value); }

void WriteRunsCsv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << "run_id,seed,config_hash,status,final_k,final_gap,"
         "final_consensus_error,final_conservation_residual,final_eps,"
         "trajectory_path,ledger_path\n";
  for (const RunRecord& r : records) {
    out << r.run_id << ',' << r.seed << ',' << r.config_hash << ','
        << (r.ok ? "ok" : "failed") << ','
        << (r.metrics.recorded_iterations.empty()
                ? 0
                : r.metrics.recorded_iterations.back())
        << ',' << Num(r.final_gap()) << ',' << Num(r.final_consensus_error())
        << ',' << Num(r.final_conservation_residual()) << ','
        << Num(r.final_eps()) << ',' << r.trajectory_path.filename().string()
        << ',' << r.ledger_path.filename().string() << '\n';
  }
}

}  // namespace

absl::StatusOr<ExperimentResult> RunExperiment(
    const ExperimentConfig& config, const ExecutionOptions& execution,
    std::optional<double> match_eps) {
  absl::StatusOr<PreparedExperiment> prepared = Prepare(config, match_eps);
  if (!prepared.ok()) return prepared.status();
  const std::string canonical = CanonicalConfig(config);
  const std::string hash = Sha256Hex(canonical);

  if (execution.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(config.output.directory, ec);
    if (ec) {
      return absl::InternalError(absl::StrCat(
          "cannot create ", config.output.directory.string(), ": ", ec.message()));
    }
    const std::filesystem::path dir = config.output.directory;
    if (auto s = WriteText(dir / "config.json", canonical); !s.ok()) return s;
    if (auto s = WriteText(dir / "instance.json",
                           InstanceToJson(prepared->instance, &prepared->x_star)
                                   .dump(2) +
                               "\n");
        !s.ok()) {
      return s;
    }
    if (auto s = WriteText(dir / "graph.json", GraphJson(*prepared).dump(2) + "\n");
        !s.ok()) {
      return s;
    }
  }

  ExperimentResult result;
  result.eps_guarantee = prepared->eps_guarantee;
  const std::vector<uint64_t>& seeds = config.run.seeds;
  result.records.resize(seeds.size());
  const int workers = std::clamp<int>(execution.jobs, 1, static_cast<int>(seeds.size()));
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < seeds.size(); i = next++) {
      result.records[i] = ExecuteRun(config, *prepared, seeds[i], hash, execution);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  if (execution.write_files) {
    const std::filesystem::path dir = config.output.directory;
    std::ostringstream runs;
    WriteRunsCsv(result.records, runs);
    if (auto s = WriteText(dir / "runs.csv", runs.str()); !s.ok()) return s;
    absl::StatusOr<std::vector<SummaryRow>> summary = Summarize(result.records);
    if (summary.ok()) {
      std::ostringstream text;
      WriteSummaryCsv(*summary, text);
      if (auto s = WriteText(dir / "summary.csv", text.str()); !s.ok()) return s;
    }
  }
  return result;
}

SampleStats ComputeStats(std::vector<double> values) {
  SampleStats stats;
  if (values.empty()) return stats;
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  stats.mean = sum / n;
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - stats.mean) * (v - stats.mean);
    stats.variance = sq / (n - 1.0);
  }
  std::sort(values.begin(), values.end());
  const size_t mid = values.size() / 2;
  stats.median = values.size() % 2 == 1 ? values[mid]
                                        : 0.5 * (values[mid - 1] + values[mid]);
  return stats;
}

absl::StatusOr<std::vector<SummaryRow>> Summarize(
    const std::vector<RunRecord>& records) {
  std::vector<const RunRecord*> ok;
  for (const RunRecord& r : records) {
    if (r.ok) ok.push_back(&r);
  }
  if (ok.empty()) {
    return absl::InvalidArgumentError("summarize needs at least one successful run");
  }
  const std::vector<int64_t>& iterations = ok.front()->metrics.recorded_iterations;
  for (const RunRecord* r : ok) {
    if (r->metrics.recorded_iterations != iterations) {
      return absl::InvalidArgumentError(absl::StrCat(
          "run ", r->run_id, " was recorded at different iterations than ",
          ok.front()->run_id));
    }
  }
  std::vector<SummaryRow> rows;
  rows.reserve(iterations.size());
  for (size_t t = 0; t < iterations.size(); ++t) {
    std::vector<double> gap;
    std::vector<double> consensus;
    double eps = 0.0;
    for (const RunRecord* r : ok) {
      gap.push_back(r->metrics.equilibrium_gap[t]);
      consensus.push_back(r->metrics.consensus_error[t]);
      eps += r->metrics.eps_spent[t];
    }
    const SampleStats g = ComputeStats(std::move(gap));
    const SampleStats c = ComputeStats(std::move(consensus));
    rows.push_back(SummaryRow{iterations[t], static_cast<int>(ok.size()), g.mean,
                              g.median, g.variance, c.mean, c.median, c.variance,
                              eps / static_cast<double>(ok.size())});
  }
  return rows;
}

void WriteSummaryCsv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "k,runs,gap_mean,gap_median,gap_variance,consensus_mean,"
         "consensus_median,consensus_variance,eps_mean\n";
  for (const SummaryRow& r : rows) {
    out << r.k << ',' << r.runs << ',' << Num(r.gap_mean) << ','
        << Num(r.gap_median) << ',' << Num(r.gap_variance) << ','
        << Num(r.consensus_mean) << ',' << Num(r.consensus_median) << ','
        << Num(r.consensus_variance) << ',' << Num(r.eps_mean) << '\n';
  }
}

void WriteTrajectoryCsv(const std::string& run_id,
                        const TrajectoryMetrics& metrics, std::ostream& out) {
  out << "run_id,k,equilibrium_gap,consensus_error,conservation_residual,"
         "eps_spent\n";
  for (size_t t = 0; t < metrics.size(); ++t) {
    out << run_id << ',' << metrics.recorded_iterations[t] << ','
        << Num(metrics.equilibrium_gap[t]) << ','
        << Num(metrics.consensus_error[t]) << ','
        << Num(metrics.conservation_residual[t]) << ','
        << Num(metrics.eps_spent[t]) << '\n';
  }
}

absl::StatusOr<RunRecord> ReadTrajectoryCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "run_id,k,equilibrium_gap,consensus_error,conservation_residual,"
              "eps_spent") {
    return absl::InvalidArgumentError("not a trajectory CSV (bad header)");
  }
  RunRecord record;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells = absl::StrSplit(line, ',');
    if (cells.size() != 6) {
      return absl::InvalidArgumentError(
          absl::StrCat("trajectory CSV row ", row, " has ", cells.size(),
                       " cells, expected 6"));
    }
    if (record.run_id.empty()) record.run_id = cells[0];
    int64_t k = 0;
    double values[4];
    bool ok = absl::SimpleAtoi(cells[1], &k);
    for (int c = 0; c < 4; ++c) ok = ok && absl::SimpleAtod(cells[2 + c], &values[c]);
    if (!ok) {
      return absl::InvalidArgumentError(
          absl::StrCat("trajectory CSV row ", row, " has a malformed number"));
    }
    record.metrics.recorded_iterations.push_back(k);
    record.metrics.equilibrium_gap.push_back(values[0]);
    record.metrics.consensus_error.push_back(values[1]);
    record.metrics.conservation_residual.push_back(values[2]);
    record.metrics.eps_spent.push_back(values[3]);
  }
  if (record.metrics.size() == 0) {
    return absl::InvalidArgumentError("trajectory CSV has no rows");
  }
  record.ok = true;
  return record;
}

absl::StatusOr<std::vector<RunRecord>> ReadTrajectoryDirectory(
    const std::filesystem::path& directory) {
  std::error_code ec;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(directory, ec)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("traj_", 0) == 0 &&
        entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  if (ec) {
    return absl::NotFoundError(
        absl::StrCat("cannot read ", directory.string(), ": ", ec.message()));
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> records;
  for (const auto& file : files) {
    std::ifstream in(file);
    absl::StatusOr<RunRecord> record = ReadTrajectoryCsv(in);
    if (!record.ok()) {
      return absl::Status(record.status().code(),
                          absl::StrCat(file.string(), ": ",
                                       record.status().message()));
    }
    record->trajectory_path = file;
    records.push_back(*std::move(record));
  }
  if (records.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat("no trajectory files in ", directory.string()));
  }
  return records;
}

absl::StatusOr<ComparisonTable> CompareAlgorithms(
    const std::vector<ExperimentConfig>& configs,
    const ExecutionOptions& execution) {
  if (configs.empty()) return absl::InvalidArgumentError("no configs to compare");
  const ExperimentConfig& first = configs.front();
  std::optional<double> reference_eps;
  for (size_t i = 0; i < configs.size(); ++i) {
    const ExperimentConfig& c = configs[i];
    for (const char* section : {"game", "graph", "run"}) {
      if (c.document[section] != first.document[section]) {
        return absl::InvalidArgumentError(absl::StrCat(
            "config '", c.label, "' differs from '", first.label, "' in '",
            section, "'"));
      }
    }
    for (size_t j = 0; j < i; ++j) {
      if (configs[j].label == c.label) {
        return absl::InvalidArgumentError(
            absl::StrCat("duplicate label '", c.label, "'"));
      }
      if (configs[j].output.directory == c.output.directory) {
        return absl::InvalidArgumentError(absl::StrCat(
            "configs '", configs[j].label, "' and '", c.label,
            "' share an output directory"));
      }
    }
    if (!reference_eps.has_value() && c.nu.has_value()) {
      absl::StatusOr<double> eps = BudgetGuarantee(c, *c.nu);
      if (!eps.ok()) return eps.status();
      reference_eps = *eps;
    }
  }

  ComparisonTable table;
  for (const ExperimentConfig& c : configs) {
    absl::StatusOr<ExperimentResult> result =
        RunExperiment(c, execution, reference_eps);
    if (!result.ok()) {
      return absl::Status(result.status().code(),
                          absl::StrCat("config '", c.label, "': ",
                                       result.status().message()));
    }
    absl::StatusOr<std::vector<SummaryRow>> summary = Summarize(result->records);
    if (!summary.ok()) return summary.status();
    AlgorithmColumn column;
    column.label = c.label;
    column.algorithm = c.algorithm;
    column.summary = *std::move(summary);
    column.eps_spent = column.summary.back().eps_mean;
    column.eps_guarantee = result->eps_guarantee;
    column.final_gap_median = column.summary.back().gap_median;
    column.all_ok = result->all_ok();
    if (table.iterations.empty()) {
      for (const SummaryRow& r : column.summary) table.iterations.push_back(r.k);
    }
    table.columns.push_back(std::move(column));
  }
  return table;
}

void WriteComparisonCsv(const ComparisonTable& table, std::ostream& out) {
  out << 'k';
  for (const AlgorithmColumn& c : table.columns) {
    out << ',' << c.label << "_gap_mean," << c.label << "_gap_median,"
        << c.label << "_gap_variance," << c.label << "_consensus_median";
  }
  out << '\n';
  for (size_t t = 0; t < table.iterations.size(); ++t) {
    out << table.iterations[t];
    for (const AlgorithmColumn& c : table.columns) {
      const SummaryRow& r = c.summary[t];
      out << ',' << Num(r.gap_mean) << ',' << Num(r.gap_median) << ','
          << Num(r.gap_variance) << ',' << Num(r.consensus_median);
    }
    out << '\n';
  }
}

void WriteComparisonBudgetCsv(const ComparisonTable& table, std::ostream& out) {
  out << "label,algorithm,eps_spent,eps_guarantee,final_gap_median\n";
  for (const AlgorithmColumn& c : table.columns) {
    out << c.label << ',' << VariantName(c.algorithm) << ',' << Num(c.eps_spent)
        << ',' << Num(c.eps_guarantee) << ',' << Num(c.final_gap_median) << '\n';
  }
}

}  // namespace dpnash
