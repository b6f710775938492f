#pragma once

// Run directories, stage caching and the command implementations behind tools/topol.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topol/embed.hpp"
#include "topol/explain.hpp"
#include "topol/lexicon.hpp"
#include "topol/manifold.hpp"
#include "topol/stats.hpp"

namespace topol::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::filesystem::path corpus;
  corpus::Format format = corpus::Format::jsonl;
  embed::ProviderConfig provider;
  std::size_t d = 50;
  std::size_t k = 100;
  double r = 1.5;
  std::size_t tau = 3;
  std::size_t permutations = 1000;
  std::uint64_t seed = 0;
  std::string boundary;
  std::filesystem::path out;
  double min_dist = 0.1;
  int n_epochs = 200;
  manifold::Metric metric = manifold::Metric::cosine;
  std::string grid;  // empty: default grid
  explain::ExplainerConfig explainer;
  std::filesystem::path explain_script;  // scripted mock replies; overrides the HTTP client
  std::filesystem::path lexicon;
  std::filesystem::path lexicon_embeddings;  // file provider for lexicon terms
  std::filesystem::path probabilities;

  /// Throws on unknown keys or unparsable values.
  static RunConfig from_map(const std::map<std::string, std::string>& values);
  std::map<std::string, std::string> to_map() const;
  manifold::UmapParams umap_params() const;
};

/// Flat "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::string format_config_text(const std::map<std::string, std::string>& values);
/// File values overlaid by flag values (flags win).
std::map<std::string, std::string> merge_config(std::map<std::string, std::string> file,
                                                const std::map<std::string, std::string>& flags);

/// Exclusive lock on a run directory (O_EXCL lock file). Throws if already held.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct StageRecord {
  std::string key;
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::string started;
  std::string finished;
  bool cache_hit = false;
};

struct RunManifest {
  std::map<std::string, std::string> config;
  std::map<std::string, StageRecord> stages;
  std::map<std::string, std::string> artifacts;  // every tracked file -> sha256
  std::string version = kVersion;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  static RunManifest load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;
  /// Files whose checksum no longer matches (or that are missing).
  std::vector<std::string> verify(const std::filesystem::path& dir) const;
};

/// Full pipeline: embed, project, cluster, field, stats. Stages rerun only when their input keys change.
RunManifest cmd_run(const RunConfig& config);

stats::PermutationReport cmd_permtest(const std::filesystem::path& run, std::optional<std::size_t> permutations,
                                      std::optional<std::uint64_t> seed);

stats::SweepResult cmd_sweep(const std::filesystem::path& run, const std::string& grid);

/// Topics empty means every eligible topic. The client is chosen from the run config when null.
std::vector<explain::Explanation> cmd_explain(const std::filesystem::path& run, const std::vector<std::uint32_t>& topics,
                                              explain::ChatClient* client = nullptr);

struct VadReport {
  std::vector<lexicon::VadCommunity> communities;
  std::vector<lexicon::VadShift> shifts;
  std::optional<lexicon::GapReport> gap;
  std::size_t skipped_terms = 0;
};

VadReport cmd_vad(const std::filesystem::path& run, const std::filesystem::path& lexicon_path,
                  const std::optional<std::filesystem::path>& probabilities);

/// SVG of a separate 2-D UMAP fit: one circle per document, white centroid squares and one
/// arrow (line with class "arrow") per eligible topic. Written to report.svg and returned.
std::string cmd_render(const std::filesystem::path& run);

/// Human-readable manifest summary plus a checksum audit. `ok` is false on any mismatch.
std::string cmd_inspect(const std::filesystem::path& run, bool& ok);

/// Renders the SVG from already computed pieces (used by cmd_render and tests).
std::string render_svg(const MatrixD& coords2d, const corpus::RegimeAssignment& assignment,
                       const cluster::Partition& partition, const field::PolarityField& field);

}  // namespace topol::pipeline
