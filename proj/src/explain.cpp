#include "topol/explain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "topol/checksum.hpp"
#include "topol/http.hpp"

namespace topol::explain {

using nlohmann::json;

namespace {

std::vector<std::uint32_t> nearest(const std::vector<std::uint32_t>& side, std::span<const double> centroid,
                                   const MatrixD& coords, std::size_t n) {
  std::vector<std::pair<double, std::uint32_t>> d;
  d.reserve(side.size());
  for (auto i : side) {
    if (i >= coords.rows()) throw InvalidArgument("member index outside coordinates");
    const auto r = coords.row(i);
    double s = 0;
    for (std::size_t c = 0; c < r.size(); ++c) s += (r[c] - centroid[c]) * (r[c] - centroid[c]);
    d.emplace_back(std::sqrt(s), i);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::uint32_t> out;
  for (std::size_t t = 0; t < std::min(n, d.size()); ++t) out.push_back(d[t].second);
  return out;
}

const char* kSystemPrompt = R"(You compare two sets of documents, A and B, drawn from the same topic on either side of a boundary.
Identify the dimensions along which B differs from A. For each dimension:
1. give a short label for the A pole and for the B pole;
2. estimate the fraction of documents in each set that exhibit its pole (coverage_A, coverage_B in [0, 1]);
3. quote sentences from the documents that support the contrast and sentences that contradict it;
4. list keywords characteristic of each pole.

Rules:
- Use only the provided documents. Quote sentences verbatim.
- Do not invent dimensions. If there is no coherent difference, return {"dimensions": []}.
- Reply with JSON only, no prose and no code fences.

Schema:
{"dimensions": [{"label_A": string, "label_B": string, "coverage_A": number, "coverage_B": number,
  "supporting": [string], "contradicting": [string], "keywords_A": [string], "keywords_B": [string]}]}

Example reply:
{"dimensions": [{"label_A": "Growth optimism", "label_B": "Recession concern", "coverage_A": 0.6, "coverage_B": 0.7,
  "supporting": ["Output is expected to expand steadily.", "Risks to activity have intensified."],
  "contradicting": ["Conditions remain broadly unchanged."], "keywords_A": ["expansion", "robust"],
  "keywords_B": ["downturn", "strain"]}]})";

std::string strip_fences(std::string s) {
  auto start = s.find_first_not_of(" \t\r\n");
  if (start == std::string::npos) return {};
  s = s.substr(start);
  if (s.rfind("```", 0) == 0) {
    auto nl = s.find('\n');
    s = nl == std::string::npos ? std::string() : s.substr(nl + 1);
    auto close = s.rfind("```");
    if (close != std::string::npos) s = s.substr(0, close);
  }
  return s;
}

std::vector<std::string> string_list(const json& obj, const char* key, std::size_t index) {
  const auto where = "dimension " + std::to_string(index) + ": ";
  if (!obj.contains(key)) throw FormatError(where + "missing \"" + key + "\"");
  const auto& v = obj[key];
  if (!v.is_array()) throw FormatError(where + "\"" + key + "\" must be an array of strings");
  std::vector<std::string> out;
  for (const auto& s : v) {
    if (!s.is_string()) throw FormatError(where + "\"" + key + "\" must be an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

double fraction(const json& obj, const char* key, std::size_t index) {
  const auto where = "dimension " + std::to_string(index) + ": ";
  if (!obj.contains(key) || !obj[key].is_number()) throw FormatError(where + "\"" + key + "\" must be a number");
  const double v = obj[key].get<double>();
  if (!(v >= 0 && v <= 1)) throw FormatError(where + "\"" + key + "\" must lie in [0, 1]");
  return v;
}

std::string label(const json& obj, const char* key, std::size_t index) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw FormatError("dimension " + std::to_string(index) + ": \"" + key + "\" must be a string");
  return obj[key].get<std::string>();
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

NeighborhoodPair select_neighborhoods(const field::PolarityVector& topic, const field::TopicCluster& members,
                                      const MatrixD& coords, std::size_t n) {
  if (!topic.eligible) throw InvalidArgument("topic " + std::to_string(topic.topic) + " is not eligible");
  if (n < 1) throw InvalidArgument("neighborhood size must be at least 1");
  if (members.topic != topic.topic) throw InvalidArgument("cluster and polarity vector refer to different topics");
  NeighborhoodPair p;
  p.topic = topic.topic;
  p.n = n;
  p.docs_a = nearest(members.members_a, topic.centroids.mu_a, coords, n);
  p.docs_b = nearest(members.members_b, topic.centroids.mu_b, coords, n);
  return p;
}

double reliability(const PolarityDimension& dim) {
  return static_cast<double>(dim.supporting.size()) /
         static_cast<double>(std::max<std::size_t>(1, dim.contradicting.size()));
}

HttpChatClient::HttpChatClient(ExplainerConfig config) : config_(std::move(config)) {
  if (config_.endpoint.empty()) throw InvalidArgument("explainer endpoint is required");
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  json body{{"model", config_.model},
            {"temperature", config_.temperature},
            {"max_tokens", config_.max_output_tokens},
            {"response_format", {{"type", "json_object"}}},
            {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  const auto url = http::parse_url(config_.endpoint);
  const auto headers = http::bearer_from_env(config_.auth_env);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(config_.timeout_seconds * 1000));
  http::Response r;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(500) * (1ll << (attempt - 1)));
    r = http::post_json(url, body.dump(), headers, timeout);
    if (r.ok() || !http::retryable(r)) break;
  }
  if (!r.ok())
    throw Error("chat request failed: " + (r.status ? "HTTP " + std::to_string(r.status) : "transport error: " + r.error));
  try {
    const auto reply = json::parse(r.body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw ExplainError(std::string("chat response is malformed: ") + e.what(), r.body);
  }
}

ScriptedChatClient::ScriptedChatClient(const json& script) {
  model_ = script.value("model", std::string("scripted"));
  if (!script.contains("responses") || !script["responses"].is_array())
    throw FormatError("chat script needs a \"responses\" array");
  responses_ = script["responses"];
}

std::unique_ptr<ScriptedChatClient> ScriptedChatClient::from_file(const std::filesystem::path& path) {
  try {
    return std::make_unique<ScriptedChatClient>(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw FormatError("chat script is not valid JSON: " + std::string(e.what()));
  }
}

std::string ScriptedChatClient::complete(const std::vector<ChatMessage>& messages) {
  std::lock_guard lock(mu_);
  requests_.push_back(messages);
  if (next_ >= responses_.size()) throw Error("chat script exhausted");
  const auto& r = responses_[next_++];
  if (r.is_object() && r.contains("error")) throw Error("scripted transport failure: " + r["error"].get<std::string>());
  if (!r.is_string()) throw FormatError("chat script responses must be strings or {\"error\"} objects");
  return r.get<std::string>();
}

std::size_t ScriptedChatClient::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

std::vector<std::vector<ChatMessage>> ScriptedChatClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::string Prompt::hash() const { return sha256_hex(system + "\n\n" + user); }

std::string truncate_text(const std::string& text, std::size_t max_bytes, bool& truncated) {
  truncated = text.size() > max_bytes;
  if (!truncated) return text;
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut) + " [...]";
}

Prompt build_prompt(const NeighborhoodPair& pair, const corpus::Corpus& corpus, const ExplainerConfig& config) {
  if (pair.docs_a.empty() || pair.docs_b.empty()) throw InvalidArgument("both neighborhoods must be non-empty");
  Prompt p;
  p.system = kSystemPrompt;
  const std::size_t budget = config.doc_token_budget * 4;
  auto section = [&](const char* name, const std::vector<std::uint32_t>& docs, std::vector<bool>& flags) {
    std::string s = "<<<SET " + std::string(name) + " (" + std::to_string(docs.size()) + " documents)>>>\n";
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (docs[i] >= corpus.size()) throw InvalidArgument("neighborhood refers to a document outside the corpus");
      bool cut = false;
      const auto text = truncate_text(corpus[docs[i]].text, budget, cut);
      flags.push_back(cut);
      s += "[" + std::string(name) + std::to_string(i + 1) + "] " + text + "\n";
    }
    s += "<<<END SET " + std::string(name) + ">>>\n";
    return s;
  };
  p.user = "Topic " + std::to_string(pair.topic) + ". Set A precedes the boundary, set B follows it.\n\n";
  p.user += section("A", pair.docs_a, p.truncated_a);
  p.user += "\n";
  p.user += section("B", pair.docs_b, p.truncated_b);
  p.user += "\nDescribe how B differs from A. Reply with JSON matching the schema.";
  return p;
}

std::vector<PolarityDimension> parse_dimensions(const std::string& reply) {
  json j;
  try {
    j = json::parse(strip_fences(reply));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("reply is not valid JSON: ") + e.what());
  }
  const json* list = &j;
  if (j.is_object()) {
    if (!j.contains("dimensions")) throw FormatError("reply object lacks \"dimensions\"");
    list = &j["dimensions"];
  }
  if (!list->is_array()) throw FormatError("\"dimensions\" must be an array");
  std::vector<PolarityDimension> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const auto& d = (*list)[i];
    if (!d.is_object()) throw FormatError("dimension " + std::to_string(i) + ": must be an object");
    PolarityDimension dim;
    dim.label_a = label(d, "label_A", i);
    dim.label_b = label(d, "label_B", i);
    dim.coverage_a = fraction(d, "coverage_A", i);
    dim.coverage_b = fraction(d, "coverage_B", i);
    dim.supporting = string_list(d, "supporting", i);
    dim.contradicting = string_list(d, "contradicting", i);
    dim.keywords_a = string_list(d, "keywords_A", i);
    dim.keywords_b = string_list(d, "keywords_B", i);
    if (blank(dim.label_a) || blank(dim.label_b)) continue;
    out.push_back(std::move(dim));
  }
  return out;
}

Explanation explain_vector(const NeighborhoodPair& pair, const corpus::Corpus& corpus, const ExplainerConfig& config,
                           ChatClient& client) {
  const auto prompt = build_prompt(pair, corpus, config);
  Explanation e;
  e.topic = pair.topic;
  e.prompt_hash = prompt.hash();
  e.model_tag = client.model_tag();
  e.truncated_a = prompt.truncated_a;
  e.truncated_b = prompt.truncated_b;
  for (auto i : pair.docs_a) e.docs_a.push_back(corpus[i].id);
  for (auto i : pair.docs_b) e.docs_b.push_back(corpus[i].id);

  std::vector<ChatMessage> messages{{"system", prompt.system}, {"user", prompt.user}};
  auto reply = client.complete(messages);
  try {
    e.dimensions = parse_dimensions(reply);
    return e;
  } catch (const FormatError& first) {
    messages.push_back({"assistant", reply});
    messages.push_back({"user", std::string("Your reply did not match the required schema (") + first.what() +
                                    "). Reply again with JSON only, matching the schema exactly."});
    e.reprompted = true;
  }
  reply = client.complete(messages);
  try {
    e.dimensions = parse_dimensions(reply);
  } catch (const FormatError& second) {
    throw ExplainError("topic " + std::to_string(pair.topic) + ": reply invalid after reprompt: " + second.what(),
                       reply);
  }
  return e;
}

std::vector<Explanation> explain_many(const std::vector<NeighborhoodPair>& pairs, const corpus::Corpus& corpus,
                                      const ExplainerConfig& config, ChatClient& client,
                                      std::vector<std::string>& errors) {
  std::vector<Explanation> out(pairs.size());
  errors.assign(pairs.size(), std::string());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
      try {
        out[i] = explain_vector(pairs[i], corpus, config, client);
      } catch (const std::exception& ex) {
        out[i].topic = pairs[i].topic;
        errors[i] = ex.what();
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(config.max_in_flight, 1, std::max<std::size_t>(1, pairs.size()));
  if (threads == 1) {
    worker();
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return out;
}

nlohmann::ordered_json to_json(const Explanation& e) {
  nlohmann::ordered_json dims = nlohmann::ordered_json::array();
  for (const auto& d : e.dimensions) {
    nlohmann::ordered_json j;
    j["label_A"] = d.label_a;
    j["label_B"] = d.label_b;
    j["coverage_A"] = d.coverage_a;
    j["coverage_B"] = d.coverage_b;
    j["coverage_source"] = "model-estimated";
    j["supporting"] = d.supporting;
    j["contradicting"] = d.contradicting;
    j["keywords_A"] = d.keywords_a;
    j["keywords_B"] = d.keywords_b;
    j["reliability"] = reliability(d);
    dims.push_back(std::move(j));
  }
  nlohmann::ordered_json j;
  j["topic"] = e.topic;
  j["dimensions"] = std::move(dims);
  j["prompt_hash"] = e.prompt_hash;
  j["model_tag"] = e.model_tag;
  j["truncation_flags"] = {{"A", e.truncated_a}, {"B", e.truncated_b}};
  j["documents"] = {{"A", e.docs_a}, {"B", e.docs_b}};
  j["reprompted"] = e.reprompted;
  return j;
}

}  // namespace topol::explain
