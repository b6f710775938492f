#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "topol/corpus.hpp"
#include "topol/field.hpp"
#include "topol/matrix.hpp"

namespace topol::explain {

struct NeighborhoodPair {
  std::uint32_t topic = 0;
  std::vector<std::uint32_t> docs_a;  // document indices, nearest to mu_A first
  std::vector<std::uint32_t> docs_b;
  std::size_t n = 0;
};

/// Top-n members of each regime side by Euclidean distance to that side's centroid
/// (ties by index). Throws for ineligible topics.
NeighborhoodPair select_neighborhoods(const field::PolarityVector& topic, const field::TopicCluster& members,
                                      const MatrixD& coords, std::size_t n);

struct PolarityDimension {
  std::string label_a;
  std::string label_b;
  double coverage_a = 0;  // model-estimated
  double coverage_b = 0;
  std::vector<std::string> supporting;
  std::vector<std::string> contradicting;
  std::vector<std::string> keywords_a;
  std::vector<std::string> keywords_b;
};

/// |supporting| / max(1, |contradicting|).
double reliability(const PolarityDimension& dim);

struct ExplainerConfig {
  std::string endpoint;
  std::string model = "gemini-2.5-flash";
  std::string auth_env = "GEMINI_API_KEY";
  double temperature = 0.0;
  int max_output_tokens = 4096;
  double timeout_seconds = 120;
  int max_retries = 4;
  std::size_t n = 25;
  std::size_t doc_token_budget = 2000;  // per document, at ~4 characters per token
  std::size_t max_in_flight = 4;
};

struct ChatMessage {
  std::string role;  // system, user, assistant
  std::string content;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant text. Throws on transport failure.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
  virtual std::string model_tag() const = 0;
};

/// OpenAI-compatible chat-completions client.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(ExplainerConfig config);
  std::string complete(const std::vector<ChatMessage>& messages) override;
  std::string model_tag() const override { return config_.model; }

 private:
  ExplainerConfig config_;
};

/// Replays canned replies from a fixture: {"model": "...", "responses": ["...", {"error": "..."}, ...]}.
/// Replies are consumed in order; an {"error"} entry simulates a transport failure.
class ScriptedChatClient : public ChatClient {
 public:
  explicit ScriptedChatClient(const nlohmann::json& script);
  static std::unique_ptr<ScriptedChatClient> from_file(const std::filesystem::path& path);

  std::string complete(const std::vector<ChatMessage>& messages) override;
  std::string model_tag() const override { return model_; }
  std::size_t calls() const;
  std::vector<std::vector<ChatMessage>> requests() const;

 private:
  std::string model_;
  nlohmann::json responses_;
  std::size_t next_ = 0;
  std::vector<std::vector<ChatMessage>> requests_;
  mutable std::mutex mu_;
};

struct Prompt {
  std::string system;
  std::string user;
  std::vector<bool> truncated_a;
  std::vector<bool> truncated_b;

  std::string hash() const;  // sha256 of system + "\n\n" + user
};

/// Pure function of (pair, corpus texts, config).
Prompt build_prompt(const NeighborhoodPair& pair, const corpus::Corpus& corpus, const ExplainerConfig& config);

/// Keeps the head of the text within the byte budget (UTF-8 safe) and appends " [...]".
std::string truncate_text(const std::string& text, std::size_t max_bytes, bool& truncated);

/// Parses a reply into dimensions. Dimensions with an empty label are dropped.
/// Throws FormatError describing the first schema violation.
std::vector<PolarityDimension> parse_dimensions(const std::string& reply);

class ExplainError : public Error {
 public:
  ExplainError(const std::string& message, std::string raw) : Error(message), raw_(std::move(raw)) {}
  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

struct Explanation {
  std::uint32_t topic = 0;
  std::vector<PolarityDimension> dimensions;
  std::string prompt_hash;
  std::string model_tag;
  std::vector<bool> truncated_a;
  std::vector<bool> truncated_b;
  std::vector<std::string> docs_a;  // ids, for audit
  std::vector<std::string> docs_b;
  bool reprompted = false;
};

/// One request, plus one reprompt if the reply violates the schema. A second violation
/// throws ExplainError carrying the raw reply.
Explanation explain_vector(const NeighborhoodPair& pair, const corpus::Corpus& corpus, const ExplainerConfig& config,
                           ChatClient& client);

/// Explains several topics with at most config.max_in_flight concurrent requests.
/// Failures are reported per topic in `errors` (same order as `pairs`, empty string on success).
std::vector<Explanation> explain_many(const std::vector<NeighborhoodPair>& pairs, const corpus::Corpus& corpus,
                                      const ExplainerConfig& config, ChatClient& client,
                                      std::vector<std::string>& errors);

nlohmann::ordered_json to_json(const Explanation& e);

}  // namespace topol::explain
