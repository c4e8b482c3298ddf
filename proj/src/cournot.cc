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

#include "dpnash/cournot.h"

#include <cmath>
#include <memory>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "dpnash/random.h"

namespace dpnash {
namespace {

double Uniform(RandomEngine& stream, double lo, double hi) {
  return lo + (hi - lo) * UniformUnit(stream);
}

int UniformIndex(RandomEngine& stream, int n) {
  return std::min(n - 1, static_cast<int>(UniformUnit(stream) * n));
}

}  // namespace

absl::Status ValidateCournot(const CournotInstance& inst) {
  const int m = inst.num_firms;
  const int n = inst.num_markets;
  if (m < 1 || n < 1) {
    return absl::InvalidArgumentError("need at least one firm and one market");
  }
  if (inst.participation.rows() != m || inst.participation.cols() != n ||
      static_cast<int>(inst.capacity.size()) != m ||
      static_cast<int>(inst.quadratic_cost.size()) != m ||
      static_cast<int>(inst.linear_cost.size()) != m ||
      inst.price_intercept.size() != n || inst.price_slope.size() != n) {
    return absl::InvalidArgumentError("instance fields have inconsistent shapes");
  }
  for (int i = 0; i < m; ++i) {
    if (inst.participation.row(i).sum() == 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("firm ", i, " participates in no market"));
    }
    if (inst.capacity[i].size() != n || inst.linear_cost[i].size() != n ||
        inst.quadratic_cost[i].rows() != n ||
        inst.quadratic_cost[i].cols() != n) {
      return absl::InvalidArgumentError(
          absl::StrCat("firm ", i, " has mis-sized cost or capacity data"));
    }
    if ((inst.capacity[i].array() < 0.0).any()) {
      return absl::InvalidArgumentError(
          absl::StrCat("firm ", i, " has a negative capacity"));
    }
    const Eigen::MatrixXd& q = inst.quadratic_cost[i];
    if (!q.isApprox(q.transpose(), 1e-12)) {
      return absl::InvalidArgumentError(
          absl::StrCat("Q_", i, " is not symmetric"));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(q);
    if (llt.info() != Eigen::Success) {
      return absl::InvalidArgumentError(
          absl::StrCat("Q_", i, " is not positive definite"));
    }
  }
  for (int j = 0; j < n; ++j) {
    if (inst.participation.col(j).sum() == 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("market ", j, " has no firm"));
    }
    if (!(inst.price_slope[j] > 0.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("price slope of market ", j, " must be positive"));
    }
  }
  if ((inst.participation.array() != 0 && inst.participation.array() != 1)
          .any()) {
    return absl::InvalidArgumentError("participation entries must be 0 or 1");
  }
  return absl::OkStatus();
}

absl::StatusOr<CournotInstance> BuildCournot(
    uint64_t seed, int num_firms, int num_markets,
    const ParticipationSpec& participation, const CournotOptions& options) {
  if (num_firms < 1 || num_markets < 1) {
    return absl::InvalidArgumentError("need at least one firm and one market");
  }
  const int m = num_firms;
  const int n = num_markets;
  CournotInstance inst;
  inst.num_firms = m;
  inst.num_markets = n;

  if (participation.matrix.has_value()) {
    inst.participation = *participation.matrix;
  } else {
    if (!(participation.density > 0.0 && participation.density <= 1.0)) {
      return absl::InvalidArgumentError(
          "participation density must lie in (0, 1]");
    }
    RandomEngine stream =
        MakeStream({seed, ChannelId(StreamChannel::kInstance), 1});
    inst.participation.resize(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        inst.participation(i, j) =
            UniformUnit(stream) < participation.density ? 1 : 0;
      }
    }
    for (int i = 0; i < m; ++i) {
      if (inst.participation.row(i).sum() == 0) {
        inst.participation(i, UniformIndex(stream, n)) = 1;
      }
    }
    for (int j = 0; j < n; ++j) {
      if (inst.participation.col(j).sum() == 0) {
        inst.participation(UniformIndex(stream, m), j) = 1;
      }
    }
  }

  RandomEngine stream =
      MakeStream({seed, ChannelId(StreamChannel::kInstance), 0});
  for (int i = 0; i < m; ++i) {
    Vector capacity(n);
    for (int j = 0; j < n; ++j) capacity[j] = Uniform(stream, 8.0, 10.0);
    const double nu = Uniform(stream, 1.0, 10.0);
    Vector linear(n);
    for (int j = 0; j < n; ++j) linear[j] = Uniform(stream, 1.0, 2.0);
    Eigen::MatrixXd quad = nu * Eigen::MatrixXd::Identity(n, n);
    if (options.general_quadratic_cost) {
      Eigen::MatrixXd g(n, n);
      for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) g(r, c) = UniformUnit(stream);
      }
      quad += g * g.transpose() / n;
    }
    inst.capacity.push_back(std::move(capacity));
    inst.quadratic_cost.push_back(std::move(quad));
    inst.linear_cost.push_back(std::move(linear));
  }
  inst.price_intercept.resize(n);
  inst.price_slope.resize(n);
  for (int j = 0; j < n; ++j) inst.price_intercept[j] = Uniform(stream, 10.0, 20.0);
  for (int j = 0; j < n; ++j) inst.price_slope[j] = Uniform(stream, 1.0, 3.0);

  if (auto s = ValidateCournot(inst); !s.ok()) return s;
  return inst;
}

absl::StatusOr<CournotInstance> SymmetricCournot(int num_firms, double q_quad,
                                                 double q_lin, double chi,
                                                 double p_bar,
                                                 double capacity) {
  CournotInstance inst;
  inst.num_firms = num_firms;
  inst.num_markets = 1;
  inst.participation = Eigen::MatrixXi::Ones(std::max(num_firms, 0), 1);
  for (int i = 0; i < num_firms; ++i) {
    inst.capacity.push_back(Vector::Constant(1, capacity));
    inst.quadratic_cost.push_back(Eigen::MatrixXd::Constant(1, 1, q_quad));
    inst.linear_cost.push_back(Vector::Constant(1, q_lin));
  }
  inst.price_intercept = Vector::Constant(1, p_bar);
  inst.price_slope = Vector::Constant(1, chi);
  if (auto s = ValidateCournot(inst); !s.ok()) return s;
  return inst;
}

namespace {

Vector Selection(const CournotInstance& inst, int firm) {
  return inst.participation.row(firm).transpose().cast<double>();
}

Vector EvaluateGradient(const CournotInstance& inst, int firm, const Vector& own,
                        const Vector& u) {
  const Vector b = Selection(inst, firm);
  const double m = inst.num_firms;
  const Vector& chi = inst.price_slope;
  return 2.0 * inst.quadratic_cost[firm] * own + inst.linear_cost[firm] +
         b.cwiseProduct(chi).cwiseProduct(b).cwiseProduct(own) -
         b.cwiseProduct(inst.price_intercept - m * chi.cwiseProduct(u));
}

}  // namespace

absl::StatusOr<Vector> CournotPseudoGradient(const CournotInstance& instance,
                                             int firm, const Vector& own,
                                             const Vector& u) {
  if (firm < 0 || firm >= instance.num_firms) {
    return absl::InvalidArgumentError(
        absl::StrCat("firm index ", firm, " out of range"));
  }
  if (own.size() != instance.num_markets || u.size() != instance.num_markets) {
    return absl::InvalidArgumentError(absl::StrCat(
        "expected vectors of length ", instance.num_markets, ", got ",
        own.size(), " and ", u.size()));
  }
  return EvaluateGradient(instance, firm, own, u);
}

double CournotCost(const CournotInstance& instance, int firm,
                   const std::vector<Vector>& x) {
  Vector supply = Vector::Zero(instance.num_markets);
  for (int j = 0; j < instance.num_firms; ++j) {
    supply += Selection(instance, j).cwiseProduct(x[j]);
  }
  const Vector& own = x[firm];
  const Vector price =
      instance.price_intercept - instance.price_slope.cwiseProduct(supply);
  return own.dot(instance.quadratic_cost[firm] * own) +
         instance.linear_cost[firm].dot(own) -
         price.dot(Selection(instance, firm).cwiseProduct(own));
}

absl::StatusOr<GameSpec> ToGameSpec(const CournotInstance& instance) {
  if (auto s = ValidateCournot(instance); !s.ok()) return s;
  auto shared = std::make_shared<const CournotInstance>(instance);
  std::vector<Player> players;
  players.reserve(instance.num_firms);
  for (int i = 0; i < instance.num_firms; ++i) {
    absl::StatusOr<FeasibleBox> box = FeasibleBox::Create(
        Vector::Zero(instance.num_markets),
        instance.capacity[i].cwiseProduct(Selection(instance, i)));
    if (!box.ok()) return box.status();
    PseudoGradientField field;
    field.dimension = instance.num_markets;
    field.evaluate = [shared, i](const Vector& own, const Vector& u) {
      return EvaluateGradient(*shared, i, own, u);
    };
    players.push_back(Player{*std::move(box), std::move(field)});
  }
  return GameSpec::Create(std::move(players), AggregateConvention::kAverage);
}

namespace {

// φ(x) stacked, with the exact average handed to every evaluator.
Vector StackedPhi(const GameSpec& game, const std::vector<Vector>& x,
                  const Vector& aggregate) {
  const int d = game.dimension();
  Vector out(static_cast<Eigen::Index>(x.size()) * d);
  for (size_t i = 0; i < x.size(); ++i) {
    out.segment(static_cast<Eigen::Index>(i) * d, d) =
        game.player(static_cast<int>(i)).field.evaluate(x[i], aggregate);
  }
  return out;
}

Vector Mean(const std::vector<Vector>& x) {
  Vector mean = Vector::Zero(x.front().size());
  for (const Vector& xi : x) mean += xi;
  return mean / static_cast<double>(x.size());
}

double ResidualOf(const GameSpec& game, const std::vector<Vector>& x,
                  const Vector& phi, double step) {
  const int d = game.dimension();
  double sq = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const Vector moved = ProjectUnchecked(
        game.player(static_cast<int>(i)).box,
        x[i] - step * phi.segment(static_cast<Eigen::Index>(i) * d, d));
    sq += (x[i] - moved).squaredNorm();
  }
  return std::sqrt(sq);
}

}  // namespace

absl::StatusOr<double> FixedPointResidual(const GameSpec& game,
                                          const DecisionProfile& x,
                                          double step) {
  if (x.num_players() != game.num_players() ||
      x.dimension() != game.dimension()) {
    return absl::InvalidArgumentError("profile does not match the game");
  }
  const std::vector<Vector> blocks = x.Blocks();
  const Vector phi =
      StackedPhi(game, blocks, game.AggregateArgument(Mean(blocks)));
  if (!phi.allFinite()) {
    return absl::OutOfRangeError("numerical error: non-finite pseudo-gradient");
  }
  return ResidualOf(game, blocks, phi, step);
}

absl::StatusOr<DecisionProfile> SolveCentralized(
    const GameSpec& game, const CentralizedOptions& options) {
  if (!(options.tol > 0.0) || options.max_iters < 1 ||
      !(options.probe_step > 0.0) || !(options.alpha_offset > 0.0)) {
    return absl::InvalidArgumentError(
        "tol, probe_step and alpha_offset must be positive, max_iters >= 1");
  }
  const int m = game.num_players();
  const int d = game.dimension();
  std::vector<Vector> x;
  x.reserve(m);
  for (int i = 0; i < m; ++i) {
    const FeasibleBox& box = game.player(i).box;
    x.push_back(0.5 * (box.lower() + box.upper()));
  }
  double residual = 0.0;
  for (int64_t k = 0; k < options.max_iters; ++k) {
    const Vector phi = StackedPhi(game, x, game.AggregateArgument(Mean(x)));
    if (!phi.allFinite()) {
      return absl::OutOfRangeError(absl::StrCat(
          "numerical error: non-finite pseudo-gradient at iteration ", k));
    }
    residual = ResidualOf(game, x, phi, options.probe_step);
    if (residual <= options.tol) return DecisionProfile::FromBlocks(x);
    const double alpha = 1.0 / (options.alpha_offset + static_cast<double>(k));
    for (int i = 0; i < m; ++i) {
      x[i] = ProjectUnchecked(
          game.player(i).box,
          x[i] - alpha * phi.segment(static_cast<Eigen::Index>(i) * d, d));
    }
  }
  return absl::ResourceExhaustedError(absl::StrFormat(
      "no convergence after %d iterations: fixed-point residual %.3e > %.3e",
      options.max_iters, residual, options.tol));
}

absl::StatusOr<double> ClosedFormSymmetric(const SymmetricCournotParams& p) {
  if (p.num_firms < 1) return absl::InvalidArgumentError("need num_firms >= 1");
  const double denom = 2.0 * p.q_quad + p.chi + p.chi * p.num_firms;
  if (!(denom > 0.0)) {
    return absl::InvalidArgumentError("2Q + chi + chi*m must be positive");
  }
  const double x = (p.p_bar - p.q_lin) / denom;
  if (x < 0.0 || x > p.capacity) {
    return absl::OutOfRangeError(absl::StrFormat(
        "boundary case: stationary point %g lies outside [0, %g]", x,
        p.capacity));
  }
  return x;
}

Eigen::MatrixXd CournotJacobian(const CournotInstance& inst) {
  const int m = inst.num_firms;
  const int n = inst.num_markets;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m * n, m * n);
  for (int i = 0; i < m; ++i) {
    const Vector bi = Selection(inst, i);
    for (int j = 0; j < m; ++j) {
      const Vector bj = Selection(inst, j);
      Eigen::MatrixXd block =
          bi.cwiseProduct(inst.price_slope).cwiseProduct(bj).asDiagonal();
      if (i == j) block = 2.0 * inst.quadratic_cost[i] + 2.0 * block;
      jac.block(i * n, j * n, n, n) = block;
    }
  }
  return jac;
}

absl::StatusOr<CournotMonotonicityReport> VerifyMonotonicityCournot(
    const CournotInstance& instance) {
  if (auto s = ValidateCournot(instance); !s.ok()) return s;
  const Eigen::MatrixXd jac = CournotJacobian(instance);
  const Eigen::MatrixXd sym = 0.5 * (jac + jac.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym,
                                                        Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    return absl::InternalError("numerical error: eigen-solver did not converge");
  }
  CournotMonotonicityReport report;
  report.min_eigenvalue = solver.eigenvalues().minCoeff();
  report.pass = report.min_eigenvalue > 0.0;
  return report;
}

namespace {

nlohmann::json VectorJson(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

absl::StatusOr<Vector> JsonVector(const nlohmann::json& j, const char* field,
                                  int expected) {
  if (!j.is_array()) {
    return absl::InvalidArgumentError(
        absl::StrCat("instance field '", field, "' must be an array"));
  }
  std::vector<double> values = j.get<std::vector<double>>();
  if (expected >= 0 && static_cast<int>(values.size()) != expected) {
    return absl::InvalidArgumentError(absl::StrCat(
        "instance field '", field, "' has ", values.size(),
        " entries, expected ", expected));
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

nlohmann::json InstanceToJson(const CournotInstance& inst,
                              const DecisionProfile* x_star) {
  nlohmann::json out;
  out["num_firms"] = inst.num_firms;
  out["num_markets"] = inst.num_markets;
  nlohmann::json part = nlohmann::json::array();
  for (int i = 0; i < inst.num_firms; ++i) {
    std::vector<int> row(inst.num_markets);
    for (int j = 0; j < inst.num_markets; ++j) row[j] = inst.participation(i, j);
    part.push_back(row);
  }
  out["participation"] = part;
  nlohmann::json firms = nlohmann::json::array();
  for (int i = 0; i < inst.num_firms; ++i) {
    nlohmann::json firm;
    firm["capacity"] = VectorJson(inst.capacity[i]);
    firm["linear_cost"] = VectorJson(inst.linear_cost[i]);
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < inst.num_markets; ++r) {
      rows.push_back(VectorJson(inst.quadratic_cost[i].row(r).transpose()));
    }
    firm["quadratic_cost"] = rows;
    firms.push_back(firm);
  }
  out["firms"] = firms;
  out["price_intercept"] = VectorJson(inst.price_intercept);
  out["price_slope"] = VectorJson(inst.price_slope);
  if (x_star != nullptr) out["x_star"] = VectorJson(x_star->stacked());
  return out;
}

absl::StatusOr<LoadedInstance> InstanceFromJson(const nlohmann::json& json) {
  try {
    LoadedInstance loaded;
    CournotInstance& inst = loaded.instance;
    inst.num_firms = json.at("num_firms").get<int>();
    inst.num_markets = json.at("num_markets").get<int>();
    const int m = inst.num_firms;
    const int n = inst.num_markets;
    if (m < 1 || n < 1) {
      return absl::InvalidArgumentError("need at least one firm and one market");
    }
    const nlohmann::json& part = json.at("participation");
    if (!part.is_array() || static_cast<int>(part.size()) != m) {
      return absl::InvalidArgumentError(
          "instance field 'participation' must have one row per firm");
    }
    inst.participation.resize(m, n);
    for (int i = 0; i < m; ++i) {
      std::vector<int> row = part[i].get<std::vector<int>>();
      if (static_cast<int>(row.size()) != n) {
        return absl::InvalidArgumentError(
            absl::StrCat("participation row ", i, " has the wrong length"));
      }
      for (int j = 0; j < n; ++j) inst.participation(i, j) = row[j];
    }
    const nlohmann::json& firms = json.at("firms");
    if (!firms.is_array() || static_cast<int>(firms.size()) != m) {
      return absl::InvalidArgumentError(
          "instance field 'firms' must have one entry per firm");
    }
    for (int i = 0; i < m; ++i) {
      absl::StatusOr<Vector> cap = JsonVector(firms[i].at("capacity"), "capacity", n);
      if (!cap.ok()) return cap.status();
      absl::StatusOr<Vector> lin =
          JsonVector(firms[i].at("linear_cost"), "linear_cost", n);
      if (!lin.ok()) return lin.status();
      const nlohmann::json& rows = firms[i].at("quadratic_cost");
      if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
        return absl::InvalidArgumentError(
            "instance field 'quadratic_cost' must be N x N");
      }
      Eigen::MatrixXd quad(n, n);
      for (int r = 0; r < n; ++r) {
        absl::StatusOr<Vector> row = JsonVector(rows[r], "quadratic_cost", n);
        if (!row.ok()) return row.status();
        quad.row(r) = row->transpose();
      }
      inst.capacity.push_back(*std::move(cap));
      inst.linear_cost.push_back(*std::move(lin));
      inst.quadratic_cost.push_back(std::move(quad));
    }
    absl::StatusOr<Vector> p_bar =
        JsonVector(json.at("price_intercept"), "price_intercept", n);
    if (!p_bar.ok()) return p_bar.status();
    absl::StatusOr<Vector> chi = JsonVector(json.at("price_slope"), "price_slope", n);
    if (!chi.ok()) return chi.status();
    inst.price_intercept = *std::move(p_bar);
    inst.price_slope = *std::move(chi);
    if (auto s = ValidateCournot(inst); !s.ok()) return s;
    if (json.contains("x_star")) {
      absl::StatusOr<Vector> xs = JsonVector(json.at("x_star"), "x_star", m * n);
      if (!xs.ok()) return xs.status();
      loaded.x_star = DecisionProfile(*std::move(xs), n);
    }
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed instance: ", e.what()));
  }
}

}  // namespace dpnash
