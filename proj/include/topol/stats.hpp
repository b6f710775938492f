#pragma once

#include <cstdint>
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

namespace topol::stats {

struct Summary {
  double min = 0;
  double mean = 0;
  double max = 0;
};

/// Throws on empty input.
Summary summarize(std::span<const double> values);

double norm(std::span<const double> v);
/// Plain cosine similarity; both vectors must be non-zero.
double cosine(std::span<const double> a, std::span<const double> b);

double mean_magnitude(std::span<const std::vector<double>> vectors);
/// Cosines over unordered pairs, in (i, j) lexicographic order. Zero vectors are
/// dropped with a warning; throws when fewer than two remain.
std::vector<double> pairwise_cosines(std::span<const std::vector<double>> vectors);
double mean_pairwise_cosine(std::span<const std::vector<double>> vectors);

/// Over eligible vectors only. Throws when the field has none (or fewer than two usable for s_bar).
double mean_magnitude(const field::PolarityField& field);
double mean_pairwise_cosine(const field::PolarityField& field);

struct FieldStats {
  std::size_t eligible = 0;
  double m_bar = 0;
  std::optional<double> s_bar;
  std::vector<double> magnitudes;
  Summary magnitude;
  std::optional<Summary> cosine;
};

/// Requires at least two eligible vectors.
FieldStats field_stats(const field::PolarityField& field);

/// (1 + #{null >= observed}) / (N + 1).
double p_value(double observed, std::span<const double> null);

struct PermutationReport {
  double observed = 0;
  std::size_t eligible_observed = 0;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  std::vector<double> null_m;
  std::vector<double> null_s;  // NaN where fewer than two vectors were usable
  std::size_t at_least_observed = 0;
  std::size_t starved = 0;  // draws with no eligible topic (m_bar recorded as 0)
  double p_value = 1;
  Summary random_m;
  std::optional<Summary> random_s;
};

/// Draw i relabels documents with shuffle_labels(derive_seed(seed, i)); topic membership is fixed.
PermutationReport permutation_test(const MatrixD& coords, const cluster::Partition& partition,
                                   const corpus::RegimeAssignment& assignment, std::size_t tau,
                                   std::size_t permutations, std::uint64_t seed, bool parallel = true);

nlohmann::json to_json(const FieldStats& s);
nlohmann::json to_json(const PermutationReport& r, bool include_null = true);

/// Projection plus clustering used by both the run pipeline and the sweeps.
struct Topics {
  manifold::ProjectionModel model;
  MatrixD coords;
  cluster::Partition partition;
};

/// UMAP fit with derive_seed(seed, 10), kNN graph with k_graph = params.n_neighbors over U,
/// Leiden with derive_seed(seed, 11).
Topics project_and_cluster(const embed::EmbeddingMatrix& embeddings, const manifold::UmapParams& params,
                           double resolution, std::uint64_t seed);

struct SweepConfig {
  std::size_t d = 50;
  std::size_t k = 100;
  double r = 1.5;

  std::string label() const;
  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

std::vector<SweepConfig> default_grid();
/// "d,k,r;d,k,r;..."
std::vector<SweepConfig> parse_grid(std::string_view text);

struct SweepEntry {
  SweepConfig config;
  bool ok = false;
  std::string error;
  std::size_t communities = 0;
  FieldStats hotl;
  Summary random_m;
  std::optional<Summary> random_s;
  double p_value = 1;
};

struct SweepResult {
  std::uint64_t seed = 0;
  std::size_t permutations = 0;
  std::vector<SweepEntry> entries;
};

struct SweepOptions {
  manifold::UmapParams base;  // d and k are overridden per configuration
  std::size_t tau = field::kDefaultTau;
  std::size_t permutations = 1000;
  std::uint64_t seed = 0;
  bool parallel = true;  // configurations run concurrently
};

/// Refits, reclusters and rebuilds the field per configuration. Failures are recorded, not thrown.
SweepResult robustness_sweep(const embed::EmbeddingMatrix& embeddings, const corpus::RegimeAssignment& assignment,
                             std::span<const SweepConfig> grid, const SweepOptions& options);

nlohmann::json to_json(const SweepResult& r);

/// Aligned plain-text table: one block per configuration with HoTL and Random rows,
/// min/mean/max of m and s at 4 decimals.
std::string render_table(const SweepResult& r);
/// Inverse of render_table (values at table precision).
SweepResult parse_table(std::string_view text);

}  // namespace topol::stats
