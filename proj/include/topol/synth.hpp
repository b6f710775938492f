#pragma once

// Planted-shift generators for offline tests and demos.

#include <cstdint>
#include <vector>

#include "topol/corpus.hpp"
#include "topol/embed.hpp"
#include "topol/rng.hpp"

namespace topol::synth {

enum class OffsetMode { independent, shared, none };

struct PlantedSpec {
  std::size_t topics = 5;
  std::size_t docs_per_topic = 100;
  std::size_t dim = 64;
  double sigma = 0.3;         // within-topic noise per coordinate
  double center_norm = 10.0;  // topic centers are random directions at this norm
  double offset_norm = 2.0;   // regime B = regime A + offset
  OffsetMode mode = OffsetMode::independent;
  std::uint64_t seed = 0;
};

struct PlantedCorpus {
  corpus::Corpus corpus;
  embed::EmbeddingMatrix embeddings;
  corpus::RegimeAssignment assignment;
  std::vector<std::uint32_t> topic_of;
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<double>> offsets;
};

/// Documents carry attributes "topic" (number) and "regime" ("A"/"B"); half of each topic is B.
PlantedCorpus planted_corpus(const PlantedSpec& spec);

/// Uniformly random unit vector.
std::vector<double> random_direction(std::size_t dim, Rng& rng);

/// Serializes a corpus as JSONL with its attributes.
std::string to_jsonl(const corpus::Corpus& corpus);

}  // namespace topol::synth
