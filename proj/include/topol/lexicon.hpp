#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topol/cluster.hpp"
#include "topol/corpus.hpp"
#include "topol/embed.hpp"
#include "topol/field.hpp"
#include "topol/manifold.hpp"

namespace topol::lexicon {

using Vad = std::array<double, 3>;  // valence, arousal, dominance

struct VadTerm {
  std::string term;
  Vad vad{};
};

struct VadLexicon {
  std::vector<VadTerm> terms;
  Vad min{};  // declared or inferred value range per dimension
  Vad max{};

  std::size_t size() const noexcept { return terms.size(); }
};

/// term<TAB>valence<TAB>arousal<TAB>dominance, optional header line. Terms are lower-cased;
/// duplicates are an error. A header of the form "#range<TAB>lo<TAB>hi" declares the value range.
VadLexicon parse_vad_tsv(std::string_view content);
VadLexicon load_vad_tsv(const std::filesystem::path& path);

struct Probabilities {
  double positive = 0;
  double neutral = 0;
  double negative = 0;
};

/// (p_pos - p_neg) / (p_pos + p_neu + p_neg). Throws when the sum is not positive.
double sentiment_score(const Probabilities& p);

/// JSONL records {"id", "p_pos", "p_neu", "p_neg"}.
std::map<std::string, Probabilities> parse_probabilities_jsonl(std::string_view content);
std::map<std::string, Probabilities> load_probabilities(const std::filesystem::path& path);

struct ClassifierConfig {
  std::string endpoint;
  std::string model;
  std::string auth_env;
  std::size_t batch_size = 32;
  double timeout_seconds = 60;
  int max_retries = 4;
};

/// POSTs {"model", "inputs": [...]} and expects one list of {"label", "score"} per input;
/// labels are matched case-insensitively by prefix pos/neu/neg.
std::vector<Probabilities> classify_remote(std::span<const std::string> texts, const ClassifierConfig& config);

struct TopicGap {
  std::uint32_t topic = 0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::optional<double> gap;  // undefined when a side is empty
};

struct GapReport {
  double mean_a = 0;
  double mean_b = 0;
  double gap = 0;  // mean_b - mean_a
  std::vector<TopicGap> topics;
};

/// scores[i] belongs to assignment.ids()[i].
GapReport regime_sentiment_gap(std::span<const double> scores, const corpus::RegimeAssignment& assignment,
                               const cluster::Partition* partition = nullptr);

/// Scores aligned to the assignment ids; throws naming the first id without probabilities.
std::vector<double> scores_for(const std::map<std::string, Probabilities>& probs,
                               const corpus::RegimeAssignment& assignment);

struct ProjectedLexicon {
  std::vector<std::string> terms;
  std::vector<Vad> vad;
  MatrixD coords;  // terms x d
  std::size_t skipped = 0;
};

/// Embeds bare terms with the provider and places them with manifold::transform.
/// Terms whose embedding fails are skipped with a warning.
ProjectedLexicon project_lexicon(const VadLexicon& lexicon, const embed::ProviderConfig& provider,
                                 const manifold::ProjectionModel& model);

struct VadCommunity {
  std::uint32_t id = 0;
  std::vector<std::string> terms;
  std::vector<double> centroid;
  Vad mean_vad{};
};

/// Leiden over a kNN graph of the term coordinates. k_graph is clamped to the term count.
std::vector<VadCommunity> cluster_lexicon(const ProjectedLexicon& projected, double resolution, std::uint64_t seed,
                                          std::size_t k_graph = 15);

/// Community whose centroid has maximal cosine similarity with the endpoint; ties go to the lower id.
std::uint32_t assign_endpoint(std::span<const double> endpoint, std::span<const VadCommunity> communities);

struct VadShift {
  std::uint32_t topic = 0;
  std::uint32_t community_a = 0;
  std::uint32_t community_b = 0;
  Vad delta{};  // mean_vad(b) - mean_vad(a)
};

std::vector<VadShift> vad_shift(const field::PolarityField& field, std::span<const VadCommunity> communities);

nlohmann::json to_json(const GapReport& r);
nlohmann::json to_json(std::span<const VadShift> shifts, std::span<const VadCommunity> communities);

}  // namespace topol::lexicon
