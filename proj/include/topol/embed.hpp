#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "topol/corpus.hpp"
#include "topol/matrix.hpp"

namespace topol::embed {

/// Document embeddings aligned with the corpus order.
struct EmbeddingMatrix {
  MatrixF rows;
  std::vector<std::string> ids;
  std::string model_tag;

  std::size_t size() const noexcept { return rows.rows(); }
  std::size_t dim() const noexcept { return rows.cols(); }

  /// Throws unless every value is finite, ids align with rows and dim >= 2.
  void validate() const;
};

enum class ProviderKind { remote, file, synthetic };

ProviderKind parse_provider_kind(std::string_view name);
std::string to_string(ProviderKind kind);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::synthetic;
  std::string endpoint;                          // remote: full URL of the embeddings route
  std::string model = "text-embedding-3-small";  // remote model name
  std::size_t batch_size = 64;
  int max_retries = 4;
  double timeout_seconds = 60.0;
  std::string auth_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds backoff_base{500};
  std::filesystem::path path;  // file provider: saved matrix
  std::size_t dim = 64;        // synthetic provider dimensionality
  bool normalize = false;

  /// Throws when the configuration cannot work (e.g. remote without endpoint).
  void validate() const;
};

/// Embeds texts in order. ids only label the result rows.
EmbeddingMatrix embed_texts(std::span<const std::string> ids, std::span<const std::string> texts,
                            const ProviderConfig& provider);

EmbeddingMatrix embed_corpus(const corpus::Corpus& corpus, const ProviderConfig& provider);

/// Hash-seeded pseudo-random unit vector; a pure function of the text bytes.
std::vector<float> synthetic_embedding(std::string_view text, std::size_t dim);

/// Checks that the matrix rows are in the given id order. The error names the first offending id.
void check_alignment(const EmbeddingMatrix& matrix, std::span<const std::string> ids);

// Binary matrix file: "TOPOLMX\0", u32 version, u32 flags, u64 rows, u64 cols,
// rows*cols little-endian float32 (row-major), u32 CRC-32 of all preceding bytes.
// Sidecar <path>.json carries ids, model_tag, shape and checksums.

/// Serialized bytes of the binary part only.
std::string encode_matrix(const MatrixF& m);
MatrixF decode_matrix(std::string_view bytes);

void save_matrix(const std::filesystem::path& path, const MatrixF& m, const std::vector<std::string>& ids,
                 const std::string& model_tag, const nlohmann::json& extra = nlohmann::json::object());

struct LoadedMatrix {
  MatrixF matrix;
  std::vector<std::string> ids;
  std::string model_tag;
  nlohmann::json extra;
};
LoadedMatrix load_matrix(const std::filesystem::path& path);

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace topol::embed
