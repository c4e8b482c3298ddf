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

#ifndef DPNASH_NETWORK_H_
#define DPNASH_NETWORK_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "absl/status/statusor.h"
#include "dpnash/schedules.h"

namespace dpnash {

// Undirected simple graph on nodes 0..n-1.
class Graph {
 public:
  using Edge = std::pair<int, int>;

  // Edges are normalized to (min, max), sorted and deduplicated.
  static absl::StatusOr<Graph> FromEdges(int num_nodes,
                                         std::vector<Edge> edges);
  // Symmetric 0/1 matrix with zero diagonal.
  static absl::StatusOr<Graph> FromAdjacency(const Eigen::MatrixXi& adjacency);

  int num_nodes() const { return num_nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_[i]; }
  int degree(int i) const { return static_cast<int>(neighbors_[i].size()); }
  bool IsConnected() const;

 private:
  Graph(int num_nodes, std::vector<Edge> edges);

  int num_nodes_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> neighbors_;
};

Graph PathGraph(int num_nodes);
Graph RingGraph(int num_nodes);
Graph CompleteGraph(int num_nodes);

// Random spanning tree (each node, in a shuffled order, attaches to a
// uniformly chosen earlier node) plus every remaining pair independently with
// probability `extra_edge_probability`. Always connected.
absl::StatusOr<Graph> RandomConnectedGraph(int num_nodes,
                                           double extra_edge_probability,
                                           uint64_t seed);

struct WeightRule {
  enum class Kind { kUniform, kMetropolis };

  static WeightRule Uniform(double weight) { return {Kind::kUniform, weight}; }
  static WeightRule Metropolis() { return {Kind::kMetropolis, 0.0}; }

  Kind kind = Kind::kMetropolis;
  double weight = 0.0;
};

struct CouplingReport {
  bool square = false;
  bool symmetric = false;
  bool zero_row_sums = false;
  bool nonnegative_off_diagonal = false;
  bool norm_below_one = false;
  bool connected = false;
  // ‖I + L - 11ᵀ/m‖₂.
  double norm_value = 0.0;
  int zero_eigenvalues = 0;

  bool pass() const {
    return square && symmetric && zero_row_sums && nonnegative_off_diagonal &&
           norm_below_one && connected;
  }
  std::string FailureSummary() const;
};

// Checks each coupling condition independently; never fails.
CouplingReport ValidateCoupling(const Eigen::MatrixXd& entries);

// Symmetric coupling matrix L with zero row sums, non-negative off-diagonal
// weights and ‖I + L - 11ᵀ/m‖₂ < 1.
class WeightMatrix {
 public:
  struct Neighbor {
    int index;
    double weight;
  };

  static absl::StatusOr<WeightMatrix> Create(Eigen::MatrixXd entries);

  int size() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  double operator()(int i, int j) const { return entries_(i, j); }
  // Off-diagonal j with L_ij > 0, ascending j.
  const std::vector<Neighbor>& neighbors(int i) const { return neighbors_[i]; }

 private:
  explicit WeightMatrix(Eigen::MatrixXd entries);

  Eigen::MatrixXd entries_;
  std::vector<std::vector<Neighbor>> neighbors_;
};

// uniform(w): L_ij = w on edges. metropolis: L_ij = 1/(1 + max(deg_i, deg_j)).
// Diagonals are the negated off-diagonal row sums.
absl::StatusOr<WeightMatrix> BuildWeights(const Graph& graph, WeightRule rule);

struct SpectralReport {
  // Ascending: ρ_m <= ... <= ρ_2 <= ρ_1 = 0.
  std::vector<double> eigenvalues;
  // |ρ_2|, the spectral gap.
  double rho2_abs = 0.0;
  // |ρ_m|, the largest magnitude.
  double rho_m_abs = 0.0;
  double norm_check = 0.0;
};

absl::StatusOr<SpectralReport> SpectralGap(const WeightMatrix& weights);

// ‖I + γL - 11ᵀ/m‖₂ via symmetric eigen-decomposition.
double ContractionNorm(const WeightMatrix& weights, double gamma);

// Least k >= gamma.first_index() with γ^k·|ρ_m| <= 1, past which
// ‖I + γ^k L - 11ᵀ/m‖₂ = 1 - γ^k|ρ_2|. Requires γ non-increasing.
absl::StatusOr<int64_t> ContractionThreshold(const WeightMatrix& weights,
                                             const PolySchedule& gamma);

}  // namespace dpnash

#endif  // DPNASH_NETWORK_H_
