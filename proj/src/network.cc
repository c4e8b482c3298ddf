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

#include "dpnash/network.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include <Eigen/Eigenvalues>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "dpnash/random.h"

namespace dpnash {
namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kRowSumTol = 1e-12;
constexpr double kZeroEigenTol = 1e-10;
constexpr double kNormMargin = 1e-12;

Eigen::VectorXd SymmetricEigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double ProjectedNorm(const Eigen::MatrixXd& l, double gamma) {
  const Eigen::Index m = l.rows();
  const Eigen::MatrixXd shifted =
      Eigen::MatrixXd::Identity(m, m) + gamma * l -
      Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  return SymmetricEigenvalues(0.5 * (shifted + shifted.transpose()))
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

Graph::Graph(int num_nodes, std::vector<Edge> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)), neighbors_(num_nodes) {
  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());
}

absl::StatusOr<Graph> Graph::FromEdges(int num_nodes, std::vector<Edge> edges) {
  if (num_nodes < 1) {
    return absl::InvalidArgumentError("graph needs at least one node");
  }
  for (auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      return absl::InvalidArgumentError(absl::StrCat(
          "edge (", a, ", ", b, ") out of range for ", num_nodes, " nodes"));
    }
    if (a == b) {
      return absl::InvalidArgumentError(
          absl::StrCat("self-loop at node ", a, " is not allowed"));
    }
    if (a > b) std::swap(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return Graph(num_nodes, std::move(edges));
}

absl::StatusOr<Graph> Graph::FromAdjacency(const Eigen::MatrixXi& adjacency) {
  if (adjacency.rows() != adjacency.cols()) {
    return absl::InvalidArgumentError("adjacency matrix must be square");
  }
  const int n = static_cast<int>(adjacency.rows());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0) {
      return absl::InvalidArgumentError("adjacency diagonal must be zero");
    }
    for (int j = 0; j < n; ++j) {
      const int a = adjacency(i, j);
      if (a != 0 && a != 1) {
        return absl::InvalidArgumentError("adjacency entries must be 0 or 1");
      }
      if (a != adjacency(j, i)) {
        return absl::InvalidArgumentError("adjacency matrix must be symmetric");
      }
      if (a == 1 && i < j) edges.emplace_back(i, j);
    }
  }
  return FromEdges(n, std::move(edges));
}

bool Graph::IsConnected() const {
  std::vector<bool> seen(num_nodes_, false);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = true;
  int visited = 1;
  while (!frontier.empty()) {
    const int i = frontier.front();
    frontier.pop();
    for (int j : neighbors_[i]) {
      if (!seen[j]) {
        seen[j] = true;
        ++visited;
        frontier.push(j);
      }
    }
  }
  return visited == num_nodes_;
}

Graph PathGraph(int num_nodes) {
  std::vector<Graph::Edge> edges;
  for (int i = 0; i + 1 < num_nodes; ++i) edges.emplace_back(i, i + 1);
  return *Graph::FromEdges(num_nodes, std::move(edges));
}

Graph RingGraph(int num_nodes) {
  std::vector<Graph::Edge> edges;
  for (int i = 0; i + 1 < num_nodes; ++i) edges.emplace_back(i, i + 1);
  if (num_nodes > 2) edges.emplace_back(0, num_nodes - 1);
  return *Graph::FromEdges(num_nodes, std::move(edges));
}

Graph CompleteGraph(int num_nodes) {
  std::vector<Graph::Edge> edges;
  for (int i = 0; i < num_nodes; ++i) {
    for (int j = i + 1; j < num_nodes; ++j) edges.emplace_back(i, j);
  }
  return *Graph::FromEdges(num_nodes, std::move(edges));
}

absl::StatusOr<Graph> RandomConnectedGraph(int num_nodes,
                                           double extra_edge_probability,
                                           uint64_t seed) {
  if (num_nodes < 1) {
    return absl::InvalidArgumentError("graph needs at least one node");
  }
  if (!(extra_edge_probability >= 0.0 && extra_edge_probability <= 1.0)) {
    return absl::InvalidArgumentError(
        "extra_edge_probability must lie in [0, 1]");
  }
  RandomEngine engine = MakeStream({seed, ChannelId(StreamChannel::kGraph)});
  std::vector<int> order(num_nodes);
  std::iota(order.begin(), order.end(), 0);
  for (int t = num_nodes - 1; t > 0; --t) {
    const int s = static_cast<int>(engine() % static_cast<uint64_t>(t + 1));
    std::swap(order[t], order[s]);
  }
  std::vector<Graph::Edge> edges;
  for (int t = 1; t < num_nodes; ++t) {
    const int parent =
        order[static_cast<int>(engine() % static_cast<uint64_t>(t))];
    edges.emplace_back(order[t], parent);
  }
  for (int i = 0; i < num_nodes; ++i) {
    for (int j = i + 1; j < num_nodes; ++j) {
      if (UniformUnit(engine) < extra_edge_probability) edges.emplace_back(i, j);
    }
  }
  return Graph::FromEdges(num_nodes, std::move(edges));
}

std::string CouplingReport::FailureSummary() const {
  std::vector<std::string> failed;
  if (!square) failed.push_back("matrix is not square");
  if (!symmetric) failed.push_back("matrix is not symmetric");
  if (!zero_row_sums) failed.push_back("row sums are not zero");
  if (!nonnegative_off_diagonal) {
    failed.push_back("negative off-diagonal weight");
  }
  if (!norm_below_one) {
    failed.push_back(
        absl::StrCat("||I + L - 11^T/m|| = ", norm_value, " is not < 1"));
  }
  if (!connected) {
    failed.push_back(absl::StrCat("graph is not connected (", zero_eigenvalues,
                                  " zero eigenvalues)"));
  }
  return absl::StrJoin(failed, "; ");
}

CouplingReport ValidateCoupling(const Eigen::MatrixXd& entries) {
  CouplingReport report;
  report.square = entries.rows() == entries.cols() && entries.rows() > 0;
  if (!report.square) return report;
  const Eigen::Index m = entries.rows();
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());

  report.symmetric =
      (entries - entries.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol * scale;
  report.zero_row_sums =
      entries.rowwise().sum().cwiseAbs().maxCoeff() <= kRowSumTol * scale &&
      entries.colwise().sum().cwiseAbs().maxCoeff() <= kRowSumTol * scale;
  report.nonnegative_off_diagonal = true;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i != j && entries(i, j) < 0.0) report.nonnegative_off_diagonal = false;
    }
  }

  const Eigen::MatrixXd sym = 0.5 * (entries + entries.transpose());
  report.norm_value = ProjectedNorm(sym, 1.0);
  report.norm_below_one = report.norm_value < 1.0 - kNormMargin;

  const Eigen::VectorXd eig = SymmetricEigenvalues(sym);
  const double eig_scale = std::max(1.0, eig.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    if (std::abs(eig[i]) <= kZeroEigenTol * eig_scale) ++report.zero_eigenvalues;
  }
  report.connected = report.zero_eigenvalues == 1;
  return report;
}

WeightMatrix::WeightMatrix(Eigen::MatrixXd entries)
    : entries_(std::move(entries)), neighbors_(entries_.rows()) {
  for (int i = 0; i < size(); ++i) {
    for (int j = 0; j < size(); ++j) {
      if (i != j && entries_(i, j) > 0.0) {
        neighbors_[i].push_back({j, entries_(i, j)});
      }
    }
  }
}

absl::StatusOr<WeightMatrix> WeightMatrix::Create(Eigen::MatrixXd entries) {
  const CouplingReport report = ValidateCoupling(entries);
  if (!report.pass()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "weight error: invalid coupling matrix: ", report.FailureSummary()));
  }
  return WeightMatrix(std::move(entries));
}

absl::StatusOr<WeightMatrix> BuildWeights(const Graph& graph, WeightRule rule) {
  const int m = graph.num_nodes();
  if (!graph.IsConnected()) {
    return absl::FailedPreconditionError(
        "graph error: communication graph is disconnected");
  }
  if (rule.kind == WeightRule::Kind::kUniform &&
      !(rule.weight > 0.0 && std::isfinite(rule.weight))) {
    return absl::InvalidArgumentError("uniform weight must be positive");
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [a, b] : graph.edges()) {
    const double w =
        rule.kind == WeightRule::Kind::kUniform
            ? rule.weight
            : 1.0 / (1.0 + std::max(graph.degree(a), graph.degree(b)));
    l(a, b) = w;
    l(b, a) = w;
  }
  for (int i = 0; i < m; ++i) {
    double row = 0.0;
    for (int j : graph.neighbors(i)) row += l(i, j);
    l(i, i) = -row;
  }
  const CouplingReport report = ValidateCoupling(l);
  if (!report.norm_below_one) {
    int max_degree = 0;
    for (int i = 0; i < m; ++i) max_degree = std::max(max_degree, graph.degree(i));
    return absl::FailedPreconditionError(absl::StrCat(
        "weight error: ||I + L - 11^T/m|| = ", report.norm_value,
        " is not < 1; shrink the uniform weight below 1/", max_degree,
        " (max degree ", max_degree, ")"));
  }
  if (!report.pass()) {
    return absl::InternalError(
        absl::StrCat("constructed coupling is invalid: ",
                     report.FailureSummary()));
  }
  return WeightMatrix::Create(std::move(l));
}

absl::StatusOr<SpectralReport> SpectralGap(const WeightMatrix& weights) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      weights.entries(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    return absl::InternalError("numerical error: eigen-solver did not converge");
  }
  SpectralReport report;
  const Eigen::VectorXd& eig = solver.eigenvalues();
  report.eigenvalues.assign(eig.data(), eig.data() + eig.size());
  const Eigen::Index m = eig.size();
  report.rho2_abs = m >= 2 ? std::abs(eig[m - 2]) : 0.0;
  report.rho_m_abs = std::abs(eig[0]);
  report.norm_check = ProjectedNorm(weights.entries(), 1.0);
  return report;
}

double ContractionNorm(const WeightMatrix& weights, double gamma) {
  return ProjectedNorm(weights.entries(), gamma);
}

absl::StatusOr<int64_t> ContractionThreshold(const WeightMatrix& weights,
                                             const PolySchedule& gamma) {
  absl::StatusOr<SpectralReport> spectrum = SpectralGap(weights);
  if (!spectrum.ok()) return spectrum.status();
  const double rho_m = spectrum->rho_m_abs;
  auto satisfied = [&](int64_t k) { return gamma(k) * rho_m <= 1.0; };

  const int64_t start = gamma.first_index();
  if (satisfied(start)) return start;
  // Exponential search for a satisfying index, then bisection; relies on γ
  // being non-increasing.
  int64_t lo = start;
  int64_t hi = std::max<int64_t>(start + 1, 1);
  while (!satisfied(hi)) {
    lo = hi;
    if (hi > (int64_t{1} << 60)) {
      return absl::FailedPreconditionError(absl::StrCat(
          "gamma schedule ", gamma.DebugString(),
          " never drops below 1/|rho_m| = ", 1.0 / rho_m));
    }
    hi *= 2;
  }
  while (hi - lo > 1) {
    const int64_t mid = lo + (hi - lo) / 2;
    if (satisfied(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace dpnash
