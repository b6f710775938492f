#include "common.hpp"
#include "field_fixtures.hpp"
#include "topol/kernels.hpp"
#include "topol/stats.hpp"
#include "topol/synth.hpp"

using namespace topol;
using namespace topol::stats;
using corpus::Regime;
using testing::contains;
using testing::message_of;

namespace {

using Vecs = std::vector<std::vector<double>>;

field::PolarityField field_of(const Vecs& vs) {
  field::PolarityField f;
  f.d = vs.front().size();
  std::uint32_t t = 0;
  for (const auto& v : vs) {
    auto pv = field::polarity_vector(field::CentroidPair{std::vector<double>(v.size(), 0.0), v}, t++);
    pv.eligible = true;
    pv.n_a = pv.n_b = 3;
    f.topics.push_back(pv);
  }
  return f;
}

/// Reference null built from the public corpus/field/stats operations, one draw at a time.
std::vector<double> reference_null(const testing::FieldFixture& f, std::size_t tau, std::size_t n, std::uint64_t seed) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto labels = f.assignment.regimes();
    corpus::shuffle_labels(labels, derive_seed(seed, i));
    const corpus::RegimeAssignment a(f.ids, labels);
    try {
      out.push_back(mean_magnitude(field::build_field(f.partition, a, f.coords, tau)));
    } catch (const InvalidArgument&) {
      out.push_back(0.0);
    }
  }
  return out;
}

synth::PlantedCorpus small_planted(std::uint64_t seed) {
  synth::PlantedSpec s;
  s.topics = 4;
  s.docs_per_topic = 40;
  s.dim = 16;
  s.offset_norm = 1.0;
  s.seed = seed;
  return synth::planted_corpus(s);
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("mean magnitude examples") {
    CHECK(mean_magnitude(Vecs{{3, 4}}) == 5.0);
    CHECK(mean_magnitude(Vecs{{1, 0}, {0, 2}}) == 1.5);
    CHECK(mean_magnitude(Vecs{{0, 0}, {0, 0}}) == 0.0);
    CHECK_THROWS_AS(mean_magnitude(Vecs{}), InvalidArgument);
    CHECK(mean_magnitude(field_of({{3, 4}})) == 5.0);
  }

  TEST_CASE("mean pairwise cosine examples") {
    CHECK(mean_pairwise_cosine(Vecs{{1, 0}, {2, 0}}) == doctest::Approx(1.0));
    CHECK(mean_pairwise_cosine(Vecs{{1, 0}, {0, 1}}) == 0.0);
    CHECK(mean_pairwise_cosine(Vecs{{1, 0}, {0, 1}, {-1, 0}}) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK_THROWS_AS(mean_pairwise_cosine(Vecs{{1, 0}}), InvalidArgument);
  }

  TEST_CASE("zero vectors are excluded from cosine with a warning") {
    testing::CaptureWarnings w;
    CHECK(mean_pairwise_cosine(Vecs{{1, 0}, {0, 0}, {1, 1}}) == doctest::Approx(std::sqrt(0.5)));
    CHECK(w.messages.size() == 1);
    CHECK_THROWS_AS(mean_pairwise_cosine(Vecs{{1, 0}, {0, 0}}), InvalidArgument);
  }

  TEST_CASE("p-value formula") {
    std::vector<double> null(1000, 0.5);
    CHECK(p_value(1.0, null) == doctest::Approx(0.000999).epsilon(1e-3));
    CHECK(p_value(1.0, null) == 1.0 / 1001.0);
    CHECK(p_value(0.1, null) == 1.0);
    CHECK(p_value(2.0, std::vector<double>{1, 2, 3, 0}) == 0.6);
    CHECK(p_value(0.5, null) == 1.0);  // ties count as at least as extreme
  }

  TEST_CASE("field stats on a hand-built three-vector field") {
    const auto s = field_stats(field_of({{1, 0, 0}, {0, 2, 0}, {1, 1, 1}}));
    // oracle script: magnitudes 1, 2, sqrt 3; cosines 0, 1/sqrt 3, 1/sqrt 3
    CHECK(s.eligible == 3);
    CHECK(s.magnitude.min == 1.0);
    CHECK(s.magnitude.max == 2.0);
    CHECK(s.magnitude.mean == doctest::Approx(1.5773502691896255).epsilon(1e-14));
    CHECK(s.m_bar == s.magnitude.mean);
    REQUIRE(s.cosine.has_value());
    CHECK(s.cosine->min == doctest::Approx(0.0));
    CHECK(s.cosine->mean == doctest::Approx(0.3849001794597506).epsilon(1e-14));
    CHECK(s.cosine->max == doctest::Approx(0.5773502691896258).epsilon(1e-14));
    CHECK(*s.s_bar == s.cosine->mean);
    CHECK_THROWS_AS(field_stats(field_of({{1, 0}})), InvalidArgument);
  }

  TEST_CASE("identical vectors and global negation") {
    const auto same = field_stats(field_of({{1, 2}, {1, 2}, {1, 2}}));
    CHECK(same.cosine->min == doctest::Approx(1.0));
    CHECK(same.cosine->max == doctest::Approx(1.0));
    const auto a = field_stats(field_of({{1, 0}, {0.5, 2}, {-1, 1}}));
    const auto b = field_stats(field_of({{-1, 0}, {-0.5, -2}, {1, -1}}));
    CHECK(a.m_bar == b.m_bar);
    CHECK(*a.s_bar == *b.s_bar);
  }

  TEST_CASE("scale equivariance of m and invariance of s") {
    const auto f = testing::random_field_fixture(42);
    const auto base = field_stats(field::build_field(f.partition, f.assignment, f.coords));
    auto scaled = f.coords;
    for (auto& v : scaled.values()) v *= 2.5;
    const auto s = field_stats(field::build_field(f.partition, f.assignment, scaled));
    CHECK(s.m_bar == doctest::Approx(2.5 * base.m_bar).epsilon(1e-12));
    CHECK(*s.s_bar == doctest::Approx(*base.s_bar).epsilon(1e-12));
    CHECK(base.m_bar >= 0);
    CHECK(*base.s_bar >= -1);
    CHECK(*base.s_bar <= 1);
  }

  TEST_CASE("permutation null equals a draw-by-draw reference") {
    const auto f = testing::random_field_fixture(7, 90, 5, 4);
    const auto r = permutation_test(f.coords, f.partition, f.assignment, 3, 64, 99);
    CHECK(r.null_m == reference_null(f, 3, 64, 99));
    CHECK(r.observed == mean_magnitude(field::build_field(f.partition, f.assignment, f.coords)));
    std::size_t ge = 0;
    for (double v : r.null_m) ge += v >= r.observed;
    CHECK(r.at_least_observed == ge);
    CHECK(r.p_value == double(1 + ge) / 65.0);
  }

  TEST_CASE("serial and parallel null kernels are bit-identical") {
    const auto f = testing::random_field_fixture(8, 150, 7, 6);
    kernels::NullProblem p;
    p.coords = &f.coords;
    p.community = f.partition.community_of;
    p.n_communities = f.partition.count;
    p.regimes = f.assignment.regimes();
    p.permutations = 300;
    p.seed = 5;
    const auto a = kernels::permutation_null_serial(p);
    const auto b = kernels::permutation_null_parallel(p);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].m_bar == b[i].m_bar);
      CHECK(a[i].eligible == b[i].eligible);
      CHECK(a[i].s_defined == b[i].s_defined);
      if (a[i].s_defined) CHECK(a[i].s_bar == b[i].s_bar);
    }
  }

  TEST_CASE("permutation test is reproducible and bounded") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto f = testing::random_field_fixture(seed, 60, 4, 3);
      const auto r1 = permutation_test(f.coords, f.partition, f.assignment, 3, 50, seed);
      const auto r2 = permutation_test(f.coords, f.partition, f.assignment, 3, 50, seed, false);
      CHECK(r1.null_m == r2.null_m);
      CHECK(r1.p_value == r2.p_value);
      CHECK(r1.p_value >= 1.0 / 51.0);
      CHECK(r1.p_value <= 1.0);
      for (double v : r1.null_m) CHECK(v >= 0);
      for (double v : r1.null_s)
        if (!std::isnan(v)) {
          CHECK(v >= -1);
          CHECK(v <= 1);
        }
    }
  }

  TEST_CASE("starved permutations contribute zero and warn") {
    // two communities of 3 with tau 1: a reshuffle starves both when each community is single-regime
    const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
    const corpus::RegimeAssignment a(ids, {Regime::A, Regime::A, Regime::B, Regime::B, Regime::B, Regime::A});
    const cluster::Partition p{{0, 0, 0, 1, 1, 1}, 2};
    const MatrixD u(6, 1, std::vector<double>{0, 1, 2, 10, 11, 12});
    testing::CaptureWarnings w;
    const auto r = permutation_test(u, p, a, 1, 40, 1);
    CHECK(r.starved > 0);
    std::size_t zeros = 0;
    for (double v : r.null_m) zeros += v == 0.0;
    CHECK(zeros >= r.starved);
    CHECK(w.messages.size() == 1);
    CHECK(contains(w.messages[0], "no eligible"));
  }

  TEST_CASE("report json") {
    const auto f = testing::random_field_fixture(2, 60, 4, 3);
    const auto r = permutation_test(f.coords, f.partition, f.assignment, 3, 20, 3);
    const auto j = to_json(r);
    CHECK(j["N"] == 20);
    CHECK(j["p_value"] == r.p_value);
    CHECK(j["null_m_bar"].size() == 20);
    CHECK_FALSE(to_json(r, false).contains("null_m_bar"));
  }

  TEST_CASE("grid parsing and default grid") {
    const auto g = default_grid();
    REQUIRE(g.size() == 4);
    CHECK(g[1] == SweepConfig{75, 100, 1.5});
    CHECK(g[3] == SweepConfig{50, 100, 1.0});
    CHECK(parse_grid("50,100,1.5;75,100,1.5") == std::vector<SweepConfig>{{50, 100, 1.5}, {75, 100, 1.5}});
    CHECK_THROWS_AS(parse_grid("50,100"), InvalidArgument);
    CHECK(g[0].label() == "d=50 k=100 r=1.5");
  }

  TEST_CASE("sweep records failures and table round-trips") {
    const auto pc = small_planted(3);
    SweepOptions o;
    o.base.n_epochs = 100;
    o.permutations = 99;
    o.seed = 4;
    const std::vector<SweepConfig> grid{{2, 15, 1.0}, {3, 20, 0.8}, {20, 15, 1.0}};
    const auto r = robustness_sweep(pc.embeddings, pc.assignment, grid, o);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].ok);
    CHECK(r.entries[1].ok);
    CHECK_FALSE(r.entries[2].ok);
    CHECK_FALSE(r.entries[2].error.empty());
    for (std::size_t i = 0; i < 2; ++i) CHECK(r.entries[i].hotl.m_bar > r.entries[i].random_m.mean);
    o.parallel = false;
    const auto serial = robustness_sweep(pc.embeddings, pc.assignment, grid, o);
    CHECK(render_table(serial) == render_table(r));

    const auto text = render_table(r);
    CHECK(contains(text, "HoTL"));
    CHECK(contains(text, "Random"));
    CHECK(contains(text, "FAILED"));
    const auto back = parse_table(text);
    REQUIRE(back.entries.size() == 3);
    CHECK(back.entries[0].config == grid[0]);
    CHECK(back.entries[0].hotl.magnitude.mean == doctest::Approx(r.entries[0].hotl.magnitude.mean).epsilon(1e-4));
    CHECK(back.entries[1].random_m.max == doctest::Approx(r.entries[1].random_m.max).epsilon(1e-4));
    CHECK_FALSE(back.entries[2].ok);
    CHECK(back.entries[2].error == r.entries[2].error);
    CHECK(render_table(back) == text);
    const auto j = to_json(r);
    CHECK(j["configurations"].size() == 3);
  }

  TEST_CASE("single configuration sweep") {
    const auto pc = small_planted(5);
    SweepOptions o;
    o.base.n_epochs = 60;
    o.permutations = 19;
    const std::vector<SweepConfig> grid{{2, 15, 1.0}};
    CHECK(robustness_sweep(pc.embeddings, pc.assignment, grid, o).entries.size() == 1);
    CHECK_THROWS_AS(robustness_sweep(pc.embeddings, pc.assignment, std::vector<SweepConfig>{}, o), InvalidArgument);
  }
}
