#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "topol/manifold.hpp"
#include "topol/matrix.hpp"

namespace topol::cluster {

struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  double weight = 0;
};

/// Undirected weighted graph without self-loops. Each edge is stored once (u < v)
/// and expanded to symmetric adjacency.
class WeightedGraph {
 public:
  WeightedGraph() = default;
  /// Parallel edges are merged by summing weights. Throws on self-loops or non-positive weights.
  WeightedGraph(std::size_t n, std::vector<Edge> edges);

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// Total edge weight W (each undirected edge counted once).
  double total_weight() const noexcept { return total_; }
  double degree(std::size_t i) const noexcept { return degree_[i]; }

  struct Neighbor {
    std::uint32_t node;
    double weight;
  };
  std::span<const Neighbor> neighbors(std::size_t i) const noexcept {
    return {adj_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::size_t> offsets_{0};
  std::vector<Neighbor> adj_;
  std::vector<double> degree_;
  double total_ = 0;
};

WeightedGraph from_fuzzy(const manifold::FuzzyGraph& fuzzy);

/// kNN over projected coordinates (euclidean) followed by the fuzzy union weighting.
WeightedGraph graph_from_projection(const MatrixF& coords, std::size_t k_graph);

struct Partition {
  std::vector<std::uint32_t> community_of;
  std::size_t count = 0;

  /// Throws unless ids are dense in [0, count) and every id is used.
  void validate() const;
  std::vector<std::vector<std::uint32_t>> members() const;
};

/// Renumbers labels densely in order of first appearance.
Partition normalize(std::vector<std::uint32_t> labels);

/// Q = sum_c [ w_in(c) / W - gamma * (w_tot(c) / 2W)^2 ]. Zero for an edgeless graph.
double modularity(const WeightedGraph& graph, const Partition& partition, double resolution);

struct LeidenOptions {
  double resolution = 1.5;
  double randomness = 0.01;  // theta in the refinement merge
  std::uint64_t seed = 0;
  int max_iterations = 100;
  /// Called after each outer iteration with (iteration, quality of the current flat partition).
  std::function<void(int, double)> on_iteration;
};

Partition leiden(const WeightedGraph& graph, const LeidenOptions& options);

/// Whether every community induces a connected subgraph.
bool communities_connected(const WeightedGraph& graph, const Partition& partition);

std::string partition_to_csv(const Partition& partition, const std::vector<std::string>& ids);
Partition partition_from_csv(std::string_view content, const std::vector<std::string>& ids);
std::string graph_to_tsv(const WeightedGraph& graph);

}  // namespace topol::cluster
