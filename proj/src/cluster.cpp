#include "topol/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "topol/corpus.hpp"
#include "topol/rng.hpp"

namespace topol::cluster {

WeightedGraph::WeightedGraph(std::size_t n, std::vector<Edge> edges) : n_(n) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> merged;
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) throw InvalidArgument("edge endpoint out of range");
    if (e.u == e.v) throw InvalidArgument("self-loops are not allowed");
    if (!(e.weight > 0) || !std::isfinite(e.weight)) throw InvalidArgument("edge weights must be positive");
    merged[{std::min(e.u, e.v), std::max(e.u, e.v)}] += e.weight;
  }
  std::vector<std::vector<Neighbor>> adj(n);
  degree_.assign(n, 0.0);
  for (const auto& [key, w] : merged) {
    edges_.push_back({key.first, key.second, w});
    adj[key.first].push_back({key.second, w});
    adj[key.second].push_back({key.first, w});
    degree_[key.first] += w;
    degree_[key.second] += w;
    total_ += w;
  }
  offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    offsets_[i + 1] = offsets_[i] + adj[i].size();
    adj_.insert(adj_.end(), adj[i].begin(), adj[i].end());
  }
}

WeightedGraph from_fuzzy(const manifold::FuzzyGraph& fuzzy) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < fuzzy.n; ++i)
    for (auto e = fuzzy.offsets[i]; e < fuzzy.offsets[i + 1]; ++e)
      if (fuzzy.targets[e] > i) edges.push_back({static_cast<std::uint32_t>(i), fuzzy.targets[e], fuzzy.weights[e]});
  return WeightedGraph(fuzzy.n, std::move(edges));
}

WeightedGraph graph_from_projection(const MatrixF& coords, std::size_t k_graph) {
  if (coords.rows() < 2) throw InvalidArgument("graph construction needs at least 2 points");
  const auto knn = manifold::build_knn(coords, k_graph, manifold::Metric::euclidean);
  return from_fuzzy(manifold::fuzzy_simplicial_set(knn));
}

void Partition::validate() const {
  std::vector<bool> used(count, false);
  for (auto c : community_of) {
    if (c >= count) throw InvalidArgument("community id out of range");
    used[c] = true;
  }
  if (std::find(used.begin(), used.end(), false) != used.end())
    throw InvalidArgument("community ids are not dense");
}

std::vector<std::vector<std::uint32_t>> Partition::members() const {
  std::vector<std::vector<std::uint32_t>> out(count);
  for (std::size_t i = 0; i < community_of.size(); ++i) out[community_of[i]].push_back(static_cast<std::uint32_t>(i));
  return out;
}

Partition normalize(std::vector<std::uint32_t> labels) {
  std::map<std::uint32_t, std::uint32_t> remap;
  for (auto& l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<std::uint32_t>(remap.size()));
    l = it->second;
  }
  return Partition{std::move(labels), remap.size()};
}

double modularity(const WeightedGraph& graph, const Partition& partition, double resolution) {
  if (partition.community_of.size() != graph.size()) throw InvalidArgument("partition does not cover the graph");
  const double w = graph.total_weight();
  if (w <= 0) return 0.0;
  std::vector<double> inside(partition.count, 0.0), tot(partition.count, 0.0);
  for (const auto& e : graph.edges())
    if (partition.community_of[e.u] == partition.community_of[e.v]) inside[partition.community_of[e.u]] += e.weight;
  for (std::size_t i = 0; i < graph.size(); ++i) tot[partition.community_of[i]] += graph.degree(i);
  double q = 0;
  for (std::size_t c = 0; c < partition.count; ++c) {
    const double frac = tot[c] / (2.0 * w);
    q += inside[c] / w - resolution * frac * frac;
  }
  return q;
}

namespace {

// Working graph for the multilevel passes. Node weight is the summed original degree;
// `self` is the internal edge weight folded into the node by aggregation.
struct LevelGraph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> targets;
  std::vector<double> weights;
  std::vector<double> node_weight;
  std::vector<double> self;

  static LevelGraph from(const WeightedGraph& g) {
    LevelGraph lg;
    lg.n = g.size();
    lg.offsets.assign(lg.n + 1, 0);
    lg.node_weight.resize(lg.n);
    lg.self.assign(lg.n, 0.0);
    for (std::size_t i = 0; i < lg.n; ++i) {
      for (const auto& nb : g.neighbors(i)) {
        lg.targets.push_back(nb.node);
        lg.weights.push_back(nb.weight);
      }
      lg.offsets[i + 1] = lg.targets.size();
      lg.node_weight[i] = g.degree(i);
    }
    return lg;
  }
};

// Dense scratch accumulator keyed by community id.
struct Accumulator {
  std::vector<double> weight;
  std::vector<bool> present;
  std::vector<std::uint32_t> touched;

  explicit Accumulator(std::size_t n) : weight(n, 0.0), present(n, false) {}
  void add(std::uint32_t c, double w) {
    if (!present[c]) {
      present[c] = true;
      touched.push_back(c);
    }
    weight[c] += w;
  }
  void clear() {
    for (auto c : touched) {
      weight[c] = 0.0;
      present[c] = false;
    }
    touched.clear();
  }
};

class LeidenRun {
 public:
  LeidenRun(double gamma, double theta, double total_weight, Rng& rng)
      : gamma_(gamma), theta_(theta), two_w_(2.0 * total_weight), rng_(rng) {}

  // Local moving with a queue of nodes; returns true if any node moved.
  bool move_nodes(const LevelGraph& g, std::vector<std::uint32_t>& comm) {
    const std::size_t n = g.n;
    std::vector<double> tot(n, 0.0);
    std::vector<std::size_t> size(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
      tot[comm[v]] += g.node_weight[v];
      ++size[comm[v]];
    }
    std::vector<std::uint32_t> empty;
    for (std::size_t c = n; c-- > 0;)
      if (size[c] == 0) empty.push_back(static_cast<std::uint32_t>(c));

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    shuffle(order);
    std::vector<std::uint32_t> queue(order.begin(), order.end());
    std::vector<bool> queued(n, true);
    std::size_t head = 0;
    Accumulator acc(n);
    bool moved_any = false;

    while (head < queue.size()) {
      const auto v = queue[head++];
      queued[v] = false;
      const auto old = comm[v];
      const double kv = g.node_weight[v];
      acc.clear();
      acc.add(old, 0.0);
      for (auto e = g.offsets[v]; e < g.offsets[v + 1]; ++e) acc.add(comm[g.targets[e]], g.weights[e]);

      tot[old] -= kv;
      --size[old];
      auto best = old;
      double best_gain = acc.weight[old] - gamma_ * kv * tot[old] / two_w_;
      for (auto c : acc.touched) {
        const double gain = acc.weight[c] - gamma_ * kv * tot[c] / two_w_;
        if (gain > best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      if (size[old] > 0 && best_gain < 0.0 && !empty.empty()) {
        best = empty.back();
        empty.pop_back();
      }
      tot[best] += kv;
      ++size[best];
      if (size[old] == 0 && best != old) empty.push_back(old);
      if (best != old) {
        comm[v] = best;
        moved_any = true;
        for (auto e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
          const auto u = g.targets[e];
          if (!queued[u] && comm[u] != best) {
            queued[u] = true;
            queue.push_back(u);
          }
        }
      }
    }
    return moved_any;
  }

  // Refinement: singleton start, randomized merges restricted to each community.
  std::vector<std::uint32_t> refine(const LevelGraph& g, const std::vector<std::uint32_t>& comm) {
    const std::size_t n = g.n;
    std::vector<std::uint32_t> refined(n);
    std::iota(refined.begin(), refined.end(), 0u);
    std::vector<double> ref_tot(g.node_weight);
    std::vector<double> ref_ext(n, 0.0);
    std::vector<std::size_t> ref_size(n, 1);

    std::vector<std::vector<std::uint32_t>> groups(n);
    for (std::size_t v = 0; v < n; ++v) groups[comm[v]].push_back(static_cast<std::uint32_t>(v));
    std::vector<double> group_tot(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) group_tot[comm[v]] += g.node_weight[v];

    // External weight of each node towards the rest of its own community.
    std::vector<double> node_ext(n, 0.0);
    for (std::size_t v = 0; v < n; ++v)
      for (auto e = g.offsets[v]; e < g.offsets[v + 1]; ++e)
        if (comm[g.targets[e]] == comm[v]) node_ext[v] += g.weights[e];
    ref_ext = node_ext;

    Accumulator acc(n);
    std::vector<std::pair<std::uint32_t, double>> candidates;
    for (std::size_t c = 0; c < n; ++c) {
      auto& members = groups[c];
      if (members.size() < 2) continue;
      const double ks = group_tot[c];
      std::vector<std::uint32_t> visit;
      for (auto v : members)
        if (node_ext[v] >= gamma_ * g.node_weight[v] * (ks - g.node_weight[v]) / two_w_) visit.push_back(v);
      shuffle(visit);
      for (auto v : visit) {
        if (ref_size[refined[v]] != 1) continue;
        const double kv = g.node_weight[v];
        acc.clear();
        for (auto e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
          const auto u = g.targets[e];
          if (comm[u] == c && refined[u] != refined[v]) acc.add(refined[u], g.weights[e]);
        }
        candidates.clear();
        candidates.emplace_back(refined[v], 0.0);
        double max_gain = 0.0;
        for (auto r : acc.touched) {
          if (ref_ext[r] < gamma_ * ref_tot[r] * (ks - ref_tot[r]) / two_w_) continue;
          const double gain = acc.weight[r] - gamma_ * kv * ref_tot[r] / two_w_;
          if (gain < 0) continue;
          candidates.emplace_back(r, gain);
          max_gain = std::max(max_gain, gain);
        }
        if (candidates.size() == 1) continue;
        double total = 0;
        for (auto& [r, gain] : candidates) {
          gain = std::exp((gain - max_gain) / theta_);
          total += gain;
        }
        double pick = uniform01(rng_) * total;
        auto chosen = candidates.back().first;
        for (const auto& [r, p] : candidates) {
          if (pick < p) {
            chosen = r;
            break;
          }
          pick -= p;
        }
        if (chosen == refined[v]) continue;
        const double w_to = acc.weight[chosen];
        --ref_size[refined[v]];
        ref_tot[refined[v]] = 0.0;
        ref_ext[refined[v]] = 0.0;
        refined[v] = chosen;
        ++ref_size[chosen];
        ref_tot[chosen] += kv;
        ref_ext[chosen] = ref_ext[chosen] + node_ext[v] - 2.0 * w_to;
      }
    }
    return refined;
  }

 private:
  void shuffle(std::vector<std::uint32_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_below(rng_, i)]);
  }

  double gamma_;
  double theta_;
  double two_w_;
  Rng& rng_;
};

// Collapses each refined community into one node.
LevelGraph aggregate(const LevelGraph& g, const std::vector<std::uint32_t>& refined, std::size_t count) {
  LevelGraph out;
  out.n = count;
  out.node_weight.assign(count, 0.0);
  out.self.assign(count, 0.0);
  std::vector<std::map<std::uint32_t, double>> adj(count);
  for (std::size_t v = 0; v < g.n; ++v) {
    const auto rv = refined[v];
    out.node_weight[rv] += g.node_weight[v];
    out.self[rv] += g.self[v];
    for (auto e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
      const auto ru = refined[g.targets[e]];
      if (ru == rv) out.self[rv] += 0.5 * g.weights[e];  // each internal edge is seen twice
      else adj[rv][ru] += g.weights[e];
    }
  }
  out.offsets.assign(count + 1, 0);
  for (std::size_t c = 0; c < count; ++c) {
    for (const auto& [u, w] : adj[c]) {
      out.targets.push_back(u);
      out.weights.push_back(w);
    }
    out.offsets[c + 1] = out.targets.size();
  }
  return out;
}

std::vector<std::uint32_t> dense_labels(const std::vector<std::uint32_t>& labels, std::size_t& count) {
  const std::uint32_t top = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  std::vector<std::uint32_t> remap(std::size_t(top) + 1, std::uint32_t(-1));
  std::vector<std::uint32_t> out(labels.size());
  count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (remap[labels[i]] == std::uint32_t(-1)) remap[labels[i]] = static_cast<std::uint32_t>(count++);
    out[i] = remap[labels[i]];
  }
  return out;
}

std::size_t count_distinct(const std::vector<std::uint32_t>& labels) {
  const std::uint32_t top = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
  std::vector<bool> seen(std::size_t(top) + 1, false);
  std::size_t c = 0;
  for (auto l : labels)
    if (!seen[l]) {
      seen[l] = true;
      ++c;
    }
  return c;
}

// Splits every community into its connected components.
std::vector<std::uint32_t> split_disconnected(const WeightedGraph& graph, const std::vector<std::uint32_t>& labels) {
  std::vector<std::uint32_t> out(labels.size(), std::uint32_t(-1));
  std::uint32_t next = 0;
  std::vector<std::uint32_t> stack;
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (out[s] != std::uint32_t(-1)) continue;
    out[s] = next;
    stack.push_back(static_cast<std::uint32_t>(s));
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (const auto& nb : graph.neighbors(u))
        if (out[nb.node] == std::uint32_t(-1) && labels[nb.node] == labels[s]) {
          out[nb.node] = next;
          stack.push_back(nb.node);
        }
    }
    ++next;
  }
  return out;
}

}  // namespace

Partition leiden(const WeightedGraph& graph, const LeidenOptions& options) {
  if (!(options.resolution > 0)) throw InvalidArgument("Leiden resolution must be positive");
  if (!(options.randomness > 0)) throw InvalidArgument("Leiden randomness must be positive");
  const std::size_t n = graph.size();
  std::vector<std::uint32_t> flat(n);
  std::iota(flat.begin(), flat.end(), 0u);
  if (n == 0) return Partition{};
  if (graph.total_weight() <= 0) {
    if (options.on_iteration) options.on_iteration(0, 0.0);
    return normalize(std::move(flat));
  }

  Rng rng(options.seed);
  LeidenRun run(options.resolution, options.randomness, graph.total_weight(), rng);
  LevelGraph level = LevelGraph::from(graph);
  std::vector<std::uint32_t> node_of(n);  // original node -> level node
  std::iota(node_of.begin(), node_of.end(), 0u);
  std::vector<std::uint32_t> comm(n);
  std::iota(comm.begin(), comm.end(), 0u);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    run.move_nodes(level, comm);
    for (std::size_t i = 0; i < n; ++i) flat[i] = comm[node_of[i]];
    if (options.on_iteration) {
      std::size_t cnt = 0;
      auto dense = dense_labels(flat, cnt);
      options.on_iteration(iter, modularity(graph, Partition{dense, cnt}, options.resolution));
    }
    if (count_distinct(comm) == level.n) break;

    auto refined = run.refine(level, comm);
    std::size_t ref_count = 0;
    refined = dense_labels(refined, ref_count);
    if (ref_count == level.n) break;  // refinement merged nothing; the partition is stable
    std::vector<std::uint32_t> next_comm(ref_count);
    for (std::size_t v = 0; v < level.n; ++v) next_comm[refined[v]] = comm[v];
    level = aggregate(level, refined, ref_count);
    for (auto& x : node_of) x = refined[x];
    // Communities of the aggregate keep the unrefined partition; ids must stay below level.n.
    std::size_t cc = 0;
    comm = dense_labels(next_comm, cc);
  }

  for (std::size_t i = 0; i < n; ++i) flat[i] = comm[node_of[i]];
  auto split = split_disconnected(graph, flat);
  return normalize(std::move(split));
}

bool communities_connected(const WeightedGraph& graph, const Partition& partition) {
  auto split = split_disconnected(graph, partition.community_of);
  return count_distinct(split) == partition.count;
}

std::string partition_to_csv(const Partition& partition, const std::vector<std::string>& ids) {
  if (ids.size() != partition.community_of.size()) throw InvalidArgument("ids do not match partition");
  std::string out = "id,community\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out += corpus::csv_escape(ids[i]) + "," + std::to_string(partition.community_of[i]) + "\n";
  return out;
}

Partition partition_from_csv(std::string_view content, const std::vector<std::string>& ids) {
  auto records = corpus::parse_csv_records(content);
  if (records.empty() || records[0].size() < 2 || records[0][0] != "id" || records[0][1] != "community")
    throw FormatError("partition CSV must have header id,community");
  if (records.size() - 1 != ids.size()) throw FormatError("partition CSV row count does not match ids");
  std::vector<std::uint32_t> labels(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& rec = records[i + 1];
    if (rec.size() < 2 || rec[0] != ids[i]) throw FormatError("partition CSV id mismatch at row " + std::to_string(i + 1));
    labels[i] = static_cast<std::uint32_t>(std::stoul(rec[1]));
  }
  Partition p{labels, 0};
  for (auto l : labels) p.count = std::max<std::size_t>(p.count, l + 1);
  p.validate();
  return p;
}

std::string graph_to_tsv(const WeightedGraph& graph) {
  std::string out = "u\tv\tweight\n";
  char buf[64];
  for (const auto& e : graph.edges()) {
    std::snprintf(buf, sizeof buf, "%u\t%u\t%.9g\n", e.u, e.v, e.weight);
    out += buf;
  }
  return out;
}

}  // namespace topol::cluster
