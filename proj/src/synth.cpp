#include "topol/synth.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "topol/rng.hpp"

namespace topol::synth {

std::vector<double> random_direction(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  double s = 0;
  do {
    s = 0;
    for (auto& x : v) {
      x = gaussian(rng);
      s += x * x;
    }
  } while (s == 0);
  const double inv = 1.0 / std::sqrt(s);
  for (auto& x : v) x *= inv;
  return v;
}

PlantedCorpus planted_corpus(const PlantedSpec& spec) {
  if (spec.topics < 1 || spec.docs_per_topic < 2 || spec.dim < 2)
    throw InvalidArgument("planted corpus needs at least one topic, two docs per topic and dim >= 2");
  Rng rng(spec.seed);
  std::vector<std::vector<double>> centers, offsets;
  const auto shared = random_direction(spec.dim, rng);
  for (std::size_t t = 0; t < spec.topics; ++t) {
    auto c = random_direction(spec.dim, rng);
    for (auto& x : c) x *= spec.center_norm;
    centers.push_back(std::move(c));
    std::vector<double> off(spec.dim, 0.0);
    if (spec.mode != OffsetMode::none) {
      off = spec.mode == OffsetMode::shared ? shared : random_direction(spec.dim, rng);
      for (auto& x : off) x *= spec.offset_norm;
    }
    offsets.push_back(std::move(off));
  }

  const std::size_t n = spec.topics * spec.docs_per_topic;
  std::vector<corpus::Document> docs;
  std::vector<std::string> ids;
  std::vector<corpus::Regime> regimes;
  std::vector<std::uint32_t> topic_of;
  MatrixF x(n, spec.dim);
  for (std::size_t t = 0; t < spec.topics; ++t) {
    std::vector<corpus::Regime> side(spec.docs_per_topic, corpus::Regime::A);
    for (std::size_t i = spec.docs_per_topic / 2; i < spec.docs_per_topic; ++i) side[i] = corpus::Regime::B;
    corpus::shuffle_labels(side, derive_seed(spec.seed, t + 1));
    for (std::size_t i = 0; i < spec.docs_per_topic; ++i) {
      const std::size_t row = t * spec.docs_per_topic + i;
      char id[32];
      std::snprintf(id, sizeof id, "doc-%05zu", row);
      const auto r = side[i];
      corpus::Document d;
      d.id = id;
      d.text = "topic " + std::to_string(t) + " regime " + corpus::regime_char(r) + " document " + std::to_string(row);
      d.attributes["topic"] = static_cast<double>(t);
      d.attributes["regime"] = std::string(1, corpus::regime_char(r));
      for (std::size_t c = 0; c < spec.dim; ++c) {
        double v = centers[t][c] + spec.sigma * gaussian(rng);
        if (r == corpus::Regime::B) v += offsets[t][c];
        x(row, c) = static_cast<float>(v);
      }
      ids.push_back(d.id);
      regimes.push_back(r);
      topic_of.push_back(static_cast<std::uint32_t>(t));
      docs.push_back(std::move(d));
    }
  }
  PlantedCorpus out{corpus::Corpus(std::move(docs)),
                    embed::EmbeddingMatrix{std::move(x), ids, "planted"},
                    corpus::RegimeAssignment(ids, std::move(regimes)),
                    std::move(topic_of),
                    std::move(centers),
                    std::move(offsets)};
  return out;
}

std::string to_jsonl(const corpus::Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus.documents()) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["text"] = d.text;
    for (const auto& [k, v] : d.attributes) {
      if (const auto* num = std::get_if<double>(&v)) j[k] = *num;
      else j[k] = corpus::to_string(v);
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace topol::synth
