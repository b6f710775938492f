#include <algorithm>
#include <atomic>
#include <thread>

#include <httplib.h>

#include "common.hpp"
#include "topol/lexicon.hpp"

using namespace topol;
using namespace topol::lexicon;
using corpus::Regime;
using corpus::RegimeAssignment;
using testing::contains;
using testing::message_of;

namespace {

ProjectedLexicon hand_lexicon(const std::vector<std::pair<std::vector<double>, Vad>>& rows) {
  ProjectedLexicon p;
  const std::size_t d = rows.empty() ? 2 : rows[0].first.size();
  p.coords = MatrixD(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.terms.push_back("t" + std::to_string(i));
    p.vad.push_back(rows[i].second);
    for (std::size_t c = 0; c < d; ++c) p.coords(i, c) = rows[i].first[c];
  }
  return p;
}

// Two tight 2-D clouds: positive words around (10, 0), negative words around (-10, 0).
ProjectedLexicon two_valence_clouds(std::uint64_t seed, std::size_t per = 20) {
  Rng rng(seed);
  std::vector<std::pair<std::vector<double>, Vad>> rows;
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const bool pos = i < per;
    rows.push_back({{(pos ? 10.0 : -10.0) + 0.3 * gaussian(rng), 0.3 * gaussian(rng)},
                    {pos ? 0.9 : 0.1, 0.5 + 0.05 * gaussian(rng), 0.5}});
  }
  return hand_lexicon(rows);
}

field::PolarityField field_from_centroids(const std::vector<std::pair<std::vector<double>, std::vector<double>>>& pairs) {
  field::PolarityField f;
  f.d = pairs[0].first.size();
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    field::PolarityVector v = field::polarity_vector({pairs[t].first, pairs[t].second}, static_cast<std::uint32_t>(t));
    v.eligible = true;
    v.n_a = v.n_b = 5;
    f.topics.push_back(std::move(v));
  }
  return f;
}

VadCommunity community(std::uint32_t id, std::vector<double> centroid, Vad vad = {}) {
  VadCommunity c;
  c.id = id;
  c.centroid = std::move(centroid);
  c.mean_vad = vad;
  return c;
}

struct FakeClassifier {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};

  FakeClassifier() {
    server.Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests;
      const auto body = nlohmann::json::parse(req.body);
      nlohmann::json out = nlohmann::json::array();
      for (const auto& t : body["inputs"]) {
        const auto text = t.get<std::string>();
        const double pos = text.find("good") != std::string::npos ? 0.8 : 0.1;
        out.push_back(nlohmann::json::array({{{"label", "NEGATIVE"}, {"score", 0.9 - pos}},
                                             {{"label", "Neutral"}, {"score", 0.1}},
                                             {{"label", "positive"}, {"score", pos}}}));
      }
      res.set_content(out.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeClassifier() {
    server.stop();
    thread.join();
  }
};

}  // namespace

TEST_SUITE("lexicon") {
  TEST_CASE("sentiment score examples") {
    CHECK(sentiment_score({1, 0, 0}) == 1.0);
    CHECK(sentiment_score({0, 0, 1}) == -1.0);
    CHECK(sentiment_score({0.5, 0.3, 0.2}) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(sentiment_score({5, 3, 2}) == doctest::Approx(sentiment_score({0.5, 0.3, 0.2})).epsilon(1e-15));
    CHECK(contains(message_of([] { sentiment_score({0, 0, 0}); }), "zero"));
    CHECK_THROWS_AS(sentiment_score({-0.1, 0.5, 0.6}), InvalidArgument);
  }

  TEST_CASE("score stays in [-1, 1]") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
      const double s = sentiment_score({uniform01(rng), uniform01(rng), uniform01(rng) + 1e-9});
      CHECK(s >= -1.0);
      CHECK(s <= 1.0);
    }
  }

  TEST_CASE("regime gap examples") {
    const std::vector<std::string> ids{"a", "b", "c", "d"};
    const RegimeAssignment split(ids, {Regime::A, Regime::A, Regime::B, Regime::B});
    const std::vector<double> flat{0.2, 0.2, 0.2, 0.2};
    CHECK(regime_sentiment_gap(flat, split).gap == 0.0);
    const std::vector<double> opposite{-1, -1, 1, 1};
    const auto r = regime_sentiment_gap(opposite, split);
    CHECK(r.mean_a == -1.0);
    CHECK(r.mean_b == 1.0);
    CHECK(r.gap == 2.0);
    CHECK_THROWS_AS(regime_sentiment_gap(std::vector<double>{1, 2, 3}, split), InvalidArgument);
    CHECK(contains(message_of([&] {
                     regime_sentiment_gap(flat, RegimeAssignment(ids, {Regime::A, Regime::A, Regime::A, Regime::A}));
                   }),
                   "regime B is empty"));
  }

  TEST_CASE("per-topic gap on a hand fixture") {
    const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
    const RegimeAssignment split(ids, {Regime::A, Regime::B, Regime::B, Regime::A, Regime::A, Regime::A});
    const cluster::Partition p{{0, 0, 0, 1, 1, 2}, 3};
    const std::vector<double> s{0.0, 0.5, 1.0, -0.5, 0.5, 0.3};
    const auto r = regime_sentiment_gap(s, split, &p);
    REQUIRE(r.topics.size() == 3);
    REQUIRE(r.topics[0].gap);
    CHECK(*r.topics[0].gap == doctest::Approx(0.75));
    CHECK(r.topics[0].n_a == 1);
    CHECK(r.topics[0].n_b == 2);
    CHECK_FALSE(r.topics[1].gap);
    CHECK_FALSE(r.topics[2].gap);
    CHECK(r.mean_a == doctest::Approx(0.075));
    CHECK(r.mean_b == doctest::Approx(0.75));
    const auto j = to_json(r);
    CHECK(j["topics"][1]["gap"].is_null());
  }

  TEST_CASE("VAD lexicon parsing") {
    const auto lex = parse_vad_tsv("Word\tValence\tArousal\tDominance\nHappy\t0.9\t0.6\t0.7\nsad\t0.1\t0.3\t0.2\r\n\n");
    REQUIRE(lex.size() == 2);
    CHECK(lex.terms[0].term == "happy");
    CHECK(lex.terms[1].vad[2] == 0.2);
    CHECK(lex.min[0] == 0.1);
    CHECK(lex.max[0] == 0.9);

    const auto ranged = parse_vad_tsv("#range\t1\t9\ncalm\t6\t2\t5\n");
    CHECK(ranged.min[1] == 1.0);
    CHECK(ranged.max[1] == 9.0);

    CHECK(contains(message_of([] { parse_vad_tsv("joy\t1\t1\t1\nJOY\t1\t1\t1\n"); }), "duplicate lexicon term: joy"));
    CHECK(contains(message_of([] { parse_vad_tsv("joy\t1\t1\n"); }), "line 1"));
    CHECK(contains(message_of([] { parse_vad_tsv("joy\t1\t1\t1\nfear\tx\t1\t1\n"); }), "non-numeric"));
    CHECK(parse_vad_tsv("").size() == 0);
  }

  TEST_CASE("probability records") {
    const auto p = parse_probabilities_jsonl(
        "{\"id\":\"d1\",\"p_pos\":0.7,\"p_neu\":0.2,\"p_neg\":0.1}\n\n{\"id\":\"d2\",\"p_pos\":0,\"p_neu\":1,\"p_neg\":0}\n");
    REQUIRE(p.size() == 2);
    CHECK(p.at("d1").positive == 0.7);
    CHECK(contains(message_of([] { parse_probabilities_jsonl("{\"id\":\"d1\",\"p_pos\":1}\n"); }), "line 1"));
    CHECK(contains(message_of([] {
                     parse_probabilities_jsonl("{\"id\":\"x\",\"p_pos\":1,\"p_neu\":0,\"p_neg\":0}\n"
                                               "{\"id\":\"x\",\"p_pos\":1,\"p_neu\":0,\"p_neg\":0}\n");
                   }),
                   "duplicate id x"));

    const std::vector<std::string> ids{"d1", "d2", "d3"};
    const RegimeAssignment a(ids, {Regime::A, Regime::B, Regime::B});
    CHECK(contains(message_of([&] { scores_for(p, a); }), "d3"));
  }

  TEST_CASE("remote classifier") {
    FakeClassifier fake;
    ClassifierConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(fake.port) + "/classify";
    c.batch_size = 2;
    const std::vector<std::string> texts{"good day", "bad day", "good night"};
    const auto probs = classify_remote(texts, c);
    REQUIRE(probs.size() == 3);
    CHECK(fake.requests == 2);
    CHECK(probs[0].positive == doctest::Approx(0.8));
    CHECK(probs[0].negative == doctest::Approx(0.1));
    CHECK(probs[1].neutral == doctest::Approx(0.1));
    CHECK(sentiment_score(probs[1]) < 0);
    CHECK(sentiment_score(probs[2]) > 0);
  }

  TEST_CASE("lexicon projection through a fitted layout") {
    std::vector<std::uint32_t> labels;
    const auto x = testing::blobs(200, 16, 8.0, 5, &labels);
    manifold::UmapParams params;
    params.n_components = 2;
    params.metric = manifold::Metric::euclidean;
    params.n_epochs = 100;
    const auto model = manifold::fit_umap(x, params, 9);

    testing::TempDir dir("lexproj");
    embed::EmbeddingMatrix terms;
    terms.ids = {"calm", "storm", "unused"};
    terms.rows = MatrixF(3, 16);
    for (std::size_t c = 0; c < 16; ++c) {
      terms.rows(0, c) = x(0, c);
      terms.rows(1, c) = x(199, c);
      terms.rows(2, c) = 0;
    }
    terms.model_tag = "fixture";
    embed::save_embeddings(terms, dir.path / "terms.bin");

    embed::ProviderConfig provider;
    provider.kind = embed::ProviderKind::file;
    provider.path = dir.path / "terms.bin";

    const auto lex = parse_vad_tsv("calm\t0.8\t0.1\t0.6\nstorm\t0.3\t0.9\t0.4\nmissing\t0.5\t0.5\t0.5\n");
    testing::CaptureWarnings warnings;
    const auto p = project_lexicon(lex, provider, model);
    CHECK(p.skipped == 1);
    CHECK(std::any_of(warnings.messages.begin(), warnings.messages.end(),
                      [](const std::string& m) { return contains(m, "missing"); }));
    REQUIRE(p.terms == std::vector<std::string>{"calm", "storm"});
    CHECK(p.coords.rows() == 2);
    CHECK(p.coords.cols() == 2);
    CHECK(p.vad[1][1] == 0.9);
    const auto again = project_lexicon(lex, provider, model);
    CHECK(again.coords == p.coords);

    const auto empty = project_lexicon(parse_vad_tsv(""), provider, model);
    CHECK(empty.coords.rows() == 0);
    CHECK(empty.coords.cols() == 2);
  }

  TEST_CASE("lexicon communities") {
    const auto p = two_valence_clouds(1);
    const auto cs = cluster_lexicon(p, 1.0, 7);
    REQUIRE(cs.size() >= 2);
    bool saw_pos = false, saw_neg = false;
    std::size_t total = 0;
    for (const auto& c : cs) {
      total += c.terms.size();
      saw_pos |= c.centroid[0] > 5 && c.mean_vad[0] > 0.8;
      saw_neg |= c.centroid[0] < -5 && c.mean_vad[0] < 0.2;
    }
    CHECK(total == p.terms.size());
    CHECK(saw_pos);
    CHECK(saw_neg);

    const auto single = cluster_lexicon(hand_lexicon({{{1.0, 2.0}, {0.4, 0.5, 0.6}}}), 1.5, 0);
    REQUIRE(single.size() == 1);
    CHECK(single[0].centroid == std::vector<double>{1.0, 2.0});
    CHECK(single[0].mean_vad == Vad{0.4, 0.5, 0.6});

    const auto three = cluster_lexicon(
        hand_lexicon({{{0, 0}, {0.2, 0.4, 0.6}}, {{0, 0.1}, {0.4, 0.4, 0.3}}, {{0.1, 0}, {0.6, 0.1, 0.0}}}), 0.1, 0);
    REQUIRE(three.size() == 1);
    CHECK(three[0].mean_vad[0] == doctest::Approx(0.4));
    CHECK(three[0].mean_vad[1] == doctest::Approx(0.3));
    CHECK(three[0].mean_vad[2] == doctest::Approx(0.3));

    CHECK_THROWS_AS(cluster_lexicon(hand_lexicon({}), 1.0, 0), InvalidArgument);
  }

  TEST_CASE("endpoint assignment") {
    const std::vector<VadCommunity> cs{community(0, {1, 0}), community(1, {0, 1})};
    CHECK(assign_endpoint(std::vector<double>{1, 0.1}, cs) == 0);
    CHECK(assign_endpoint(std::vector<double>{0.1, 1}, cs) == 1);
    CHECK(assign_endpoint(std::vector<double>{1, 1}, cs) == 0);  // tie
    CHECK(assign_endpoint(std::vector<double>{0, 1}, cs) == 1);
    CHECK(assign_endpoint(std::vector<double>{30, 3}, cs) == assign_endpoint(std::vector<double>{1, 0.1}, cs));
    const std::vector<VadCommunity> one{community(4, {-1, -1})};
    CHECK(assign_endpoint(std::vector<double>{1, 1}, one) == 4);
    CHECK(contains(message_of([&] { assign_endpoint(std::vector<double>{0, 0}, cs); }), "zero endpoint"));
    CHECK_THROWS_AS(assign_endpoint(std::vector<double>{1, 0}, std::vector<VadCommunity>{}), InvalidArgument);
    CHECK_THROWS_AS(assign_endpoint(std::vector<double>{1, 0, 0}, cs), InvalidArgument);
  }

  TEST_CASE("VAD shifts") {
    const std::vector<VadCommunity> cs{community(0, {-10, 0.5}, {0.1, 0.5, 0.4}),
                                       community(1, {10, 0.5}, {0.9, 0.6, 0.5})};
    SUBCASE("both endpoints in one community give zero shift") {
      const auto f = field_from_centroids({{{8, 1}, {12, 1}}, {{-9, 1}, {-11, 0}}});
      for (const auto& s : vad_shift(f, cs)) {
        CHECK(s.community_a == s.community_b);
        CHECK(s.delta == Vad{0, 0, 0});
      }
    }
    SUBCASE("planted move toward positive terms") {
      const auto f = field_from_centroids({{{-10, 0}, {10, 1}}});
      const auto s = vad_shift(f, cs);
      REQUIRE(s.size() == 1);
      CHECK(s[0].community_a == 0);
      CHECK(s[0].community_b == 1);
      CHECK(s[0].delta[0] == doctest::Approx(0.8));
      CHECK(s[0].delta[1] == doctest::Approx(0.1));
      const auto back = vad_shift(field_from_centroids({{{10, 1}, {-10, 0}}}), cs);
      for (int k = 0; k < 3; ++k) CHECK(back[0].delta[k] == -s[0].delta[k]);
      const auto j = to_json(s, cs);
      CHECK(j["shifts"][0]["delta"]["valence"].get<double>() == doctest::Approx(0.8));
      CHECK(j["communities"].size() == 2);
    }
    SUBCASE("ineligible topics are skipped") {
      auto f = field_from_centroids({{{-10, 0}, {10, 1}}, {{1, 1}, {2, 2}}});
      f.topics[1].eligible = false;
      CHECK(vad_shift(f, cs).size() == 1);
    }
  }

  TEST_CASE("planted valence shift recovered through clustering") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto p = two_valence_clouds(seed);
      const auto cs = cluster_lexicon(p, 1.0, seed);
      const auto f = field_from_centroids({{{-9.5, 0.2}, {9.7, -0.1}}});
      const auto s = vad_shift(f, cs);
      REQUIRE(s.size() == 1);
      CHECK(s[0].delta[0] > 0.5);
    }
  }
}
