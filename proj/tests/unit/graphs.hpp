#pragma once

#include "topol/cluster.hpp"
#include "topol/rng.hpp"

namespace testing {

/// Two 5-cliques (0-4, 5-9) joined by the edge 4-5.
inline topol::cluster::WeightedGraph bridged_cliques() {
  std::vector<topol::cluster::Edge> e;
  for (std::uint32_t base : {0u, 5u})
    for (std::uint32_t u = 0; u < 5; ++u)
      for (std::uint32_t v = u + 1; v < 5; ++v) e.push_back({base + u, base + v, 1.0});
  e.push_back({4, 5, 1.0});
  return topol::cluster::WeightedGraph(10, e);
}

/// Stochastic block model with equal blocks. labels[i] is the planted block of node i.
inline topol::cluster::WeightedGraph planted_partition(std::size_t blocks, std::size_t size, double p_in, double p_out,
                                                       std::uint64_t seed, std::vector<std::uint32_t>& labels) {
  topol::Rng rng(seed);
  const std::size_t n = blocks * size;
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::uint32_t>(i / size);
  std::vector<topol::cluster::Edge> e;
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if (topol::uniform01(rng) < (labels[u] == labels[v] ? p_in : p_out)) e.push_back({u, v, 1.0});
  return topol::cluster::WeightedGraph(n, e);
}

/// Best modularity over every set partition (restricted growth strings). Feasible up to ~11 nodes.
inline double exhaustive_best(const topol::cluster::WeightedGraph& g, double gamma,
                              std::vector<std::uint32_t>& best_labels) {
  const std::size_t n = g.size();
  std::vector<std::uint32_t> a(n, 0), maxv(n, 0);
  double best = -2;
  auto eval = [&] {
    topol::cluster::Partition p;
    p.community_of = a;
    p.count = *std::max_element(a.begin(), a.end()) + 1;
    const double q = topol::cluster::modularity(g, p, gamma);
    if (q > best + 1e-12) {
      best = q;
      best_labels = a;
    }
  };
  while (true) {
    eval();
    std::size_t i = n - 1;
    while (i > 0 && a[i] == maxv[i - 1] + 1) --i;
    if (i == 0) break;
    ++a[i];
    maxv[i] = std::max(maxv[i - 1], a[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      a[j] = 0;
      maxv[j] = maxv[i];
    }
  }
  return best;
}

}  // namespace testing
