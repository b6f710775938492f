#include <set>

#include "common.hpp"
#include "graphs.hpp"
#include "topol/cluster.hpp"

using namespace topol;
using namespace topol::cluster;
using testing::contains;
using testing::message_of;

namespace {

LeidenOptions opts(double r, std::uint64_t seed) {
  LeidenOptions o;
  o.resolution = r;
  o.seed = seed;
  return o;
}

WeightedGraph relabeled(const WeightedGraph& g, const std::vector<std::uint32_t>& perm) {
  std::vector<Edge> e;
  for (const auto& x : g.edges()) e.push_back({perm[x.u], perm[x.v], x.weight});
  return WeightedGraph(g.size(), e);
}

WeightedGraph random_graph(std::size_t n, double p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Edge> e;
  for (std::uint32_t u = 0; u < n; ++u)
    for (std::uint32_t v = u + 1; v < n; ++v)
      if (uniform01(rng) < p) e.push_back({u, v, 0.1 + uniform01(rng)});
  return WeightedGraph(n, e);
}

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("weighted graph merges parallel edges and rejects bad ones") {
    const WeightedGraph g(3, {{0, 1, 1.0}, {1, 0, 0.5}, {1, 2, 2.0}});
    CHECK(g.edges().size() == 2);
    CHECK(g.total_weight() == 3.5);
    CHECK(g.degree(1) == 3.5);
    CHECK_THROWS_AS(WeightedGraph(2, {{0, 0, 1.0}}), InvalidArgument);
    CHECK_THROWS_AS(WeightedGraph(2, {{0, 1, 0.0}}), InvalidArgument);
    CHECK_THROWS_AS(WeightedGraph(2, {{0, 2, 1.0}}), InvalidArgument);
  }

  TEST_CASE("two projected points give a single unit edge") {
    testing::CaptureWarnings w;
    const auto g = graph_from_projection(MatrixF(2, 2, std::vector<float>{0, 0, 1, 1}), 5);
    REQUIRE(g.edges().size() == 1);
    CHECK(g.edges()[0].weight == 1.0);
  }

  TEST_CASE("far-apart blobs have no cross edges") {
    Rng rng(5);
    MatrixF x(20, 2);
    for (std::size_t i = 0; i < 20; ++i) {
      x(i, 0) = static_cast<float>((i < 10 ? 0.0 : 100.0) + uniform01(rng));
      x(i, 1) = static_cast<float>(uniform01(rng));
    }
    const auto g = graph_from_projection(x, 5);
    for (const auto& e : g.edges()) CHECK((e.u < 10) == (e.v < 10));
    CHECK(g.edges().size() > 0);
  }

  TEST_CASE("projection graph adjacency is symmetric") {
    const auto g = graph_from_projection(testing::gaussian_rows(80, 3, 2), 7);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (const auto& nb : g.neighbors(i)) {
        bool found = false;
        for (const auto& back : g.neighbors(nb.node))
          if (back.node == i) found = back.weight == nb.weight;
        CHECK(found);
      }
  }

  TEST_CASE("modularity identities") {
    const auto g = testing::bridged_cliques();
    Partition one{std::vector<std::uint32_t>(10, 0), 1};
    CHECK(modularity(g, one, 1.0) == doctest::Approx(0.0));
    CHECK(modularity(g, one, 1.5) == doctest::Approx(-0.5));
    const WeightedGraph tri(6, {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}, {2, 3, 1}});
    Partition halves{{0, 0, 0, 1, 1, 1}, 2};
    // direct evaluation of the modularity sum (oracle script)
    CHECK(modularity(tri, halves, 1.0) == doctest::Approx(0.3571428571428571).epsilon(1e-12));
    const WeightedGraph empty(5, {});
    CHECK(modularity(empty, normalize({0, 1, 2, 3, 4}), 1.0) == 0.0);
  }

  TEST_CASE("edgeless graph stays singletons") {
    const WeightedGraph empty(5, {});
    const auto p = leiden(empty, opts(1.0, 0));
    CHECK(p.count == 5);
    p.validate();
  }

  TEST_CASE("resolution and randomness must be positive") {
    auto o = opts(0.0, 1);
    CHECK_THROWS_AS(leiden(testing::bridged_cliques(), o), InvalidArgument);
    o = opts(-1.0, 1);
    CHECK_THROWS_AS(leiden(testing::bridged_cliques(), o), InvalidArgument);
    o = opts(1.0, 1);
    o.randomness = 0;
    CHECK_THROWS_AS(leiden(testing::bridged_cliques(), o), InvalidArgument);
  }

  TEST_CASE("bridged cliques recover the exhaustive optimum") {
    const auto g = testing::bridged_cliques();
    std::vector<std::uint32_t> best;
    const double q_best = testing::exhaustive_best(g, 1.0, best);
    // set-partition enumeration in the oracle script agrees
    CHECK(q_best == doctest::Approx(0.45238095238095233).epsilon(1e-12));
    CHECK(best == std::vector<std::uint32_t>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = leiden(g, opts(1.0, seed));
      CHECK(p.community_of == best);
      CHECK(modularity(g, p, 1.0) == doctest::Approx(q_best));
    }
  }

  TEST_CASE("small random graphs reach a high share of the exhaustive optimum") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto g = random_graph(9, 0.35, seed);
      if (g.edges().empty()) continue;
      std::vector<std::uint32_t> best;
      const double q_best = testing::exhaustive_best(g, 1.0, best);
      const auto p = leiden(g, opts(1.0, seed));
      CHECK(modularity(g, p, 1.0) >= q_best - 0.05);
    }
  }

  TEST_CASE("ari helper matches the reference implementation") {
    CHECK(testing::adjusted_rand({0, 0, 0, 1, 1, 1, 2, 2, 2, 2}, {1, 1, 0, 0, 2, 2, 2, 2, 0, 0}) ==
          doctest::Approx(0.05904059040590406).epsilon(1e-12));
    CHECK(testing::adjusted_rand({0, 0, 1, 1}, {5, 5, 3, 3}) == 1.0);
  }

  TEST_CASE("planted partition is recovered") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::vector<std::uint32_t> truth;
      const auto g = testing::planted_partition(4, 50, 0.3, 0.01, seed, truth);
      std::vector<double> trace;
      auto o = opts(1.0, seed);
      o.on_iteration = [&](int, double q) { trace.push_back(q); };
      const auto p = leiden(g, o);
      CHECK(testing::adjusted_rand(p.community_of, truth) >= 0.95);
      CHECK(communities_connected(g, p));
      REQUIRE_FALSE(trace.empty());
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
      CHECK(trace.back() == doctest::Approx(modularity(g, p, 1.0)));
    }
  }

  TEST_CASE("communities are connected and quality never drops on random graphs") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto g = random_graph(40 + seed * 3, 0.04 + 0.01 * double(seed % 5), 1000 + seed);
      std::vector<double> trace;
      auto o = opts(seed % 2 ? 1.5 : 1.0, seed);
      o.on_iteration = [&](int, double q) { trace.push_back(q); };
      const auto p = leiden(g, o);
      p.validate();
      CHECK(communities_connected(g, p));
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] >= trace[i - 1] - 1e-12);
    }
  }

  TEST_CASE("disconnected graph never merges components") {
    const WeightedGraph g(6, {{0, 1, 1}, {1, 2, 1}, {3, 4, 1}, {4, 5, 1}});
    const auto p = leiden(g, opts(0.1, 3));
    CHECK(communities_connected(g, p));
    CHECK(p.community_of[0] != p.community_of[3]);
  }

  TEST_CASE("deterministic and invariant to relabeling") {
    std::vector<std::uint32_t> truth;
    const auto g = testing::planted_partition(4, 50, 0.3, 0.01, 77, truth);
    const auto p1 = leiden(g, opts(1.5, 9));
    const auto p2 = leiden(g, opts(1.5, 9));
    CHECK(p1.community_of == p2.community_of);
    std::vector<std::uint32_t> perm(g.size());
    std::iota(perm.begin(), perm.end(), 0u);
    Rng rng(4);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto q = leiden(relabeled(g, perm), opts(1.5, 9));
    std::vector<std::uint32_t> back(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) back[i] = q.community_of[perm[i]];
    CHECK(testing::adjusted_rand(p1.community_of, back) == 1.0);
  }

  TEST_CASE("normalize and validate") {
    const auto p = normalize({7, 7, 3, 9, 3});
    CHECK(p.community_of == std::vector<std::uint32_t>{0, 0, 1, 2, 1});
    CHECK(p.count == 3);
    CHECK(p.members()[1] == std::vector<std::uint32_t>{2, 4});
    Partition bad{{0, 2}, 3};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  }

  TEST_CASE("partition csv and graph tsv") {
    const std::vector<std::string> ids{"a", "b", "c"};
    const auto p = normalize({0, 1, 0});
    const auto csv = partition_to_csv(p, ids);
    CHECK(csv == "id,community\na,0\nb,1\nc,0\n");
    CHECK(partition_from_csv(csv, ids).community_of == p.community_of);
    CHECK_THROWS(partition_from_csv(csv, {"a", "b", "x"}));
    const WeightedGraph g(3, {{0, 1, 0.5}});
    CHECK(graph_to_tsv(g).rfind("u\tv\tweight\n0\t1\t0.5", 0) == 0);
  }
}
