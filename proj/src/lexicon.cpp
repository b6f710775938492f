#include "topol/lexicon.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>
#include <thread>

#include "topol/checksum.hpp"
#include "topol/http.hpp"
#include "topol/log.hpp"
#include "topol/stats.hpp"

namespace topol::lexicon {

using nlohmann::json;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

VadLexicon parse_vad_tsv(std::string_view content) {
  VadLexicon lex;
  std::optional<std::pair<double, double>> declared;
  std::set<std::string> seen;
  std::stringstream ss{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f[0] == "#range") {
      if (f.size() != 3 || !to_double(f[1]) || !to_double(f[2])) throw FormatError("bad #range header");
      declared = {*to_double(f[1]), *to_double(f[2])};
      continue;
    }
    if (f.size() != 4) throw FormatError("lexicon line " + std::to_string(line_no) + ": expected 4 tab-separated fields");
    const auto v = to_double(f[1]), a = to_double(f[2]), d = to_double(f[3]);
    if (!v || !a || !d) {
      if (lex.terms.empty() && line_no == 1) continue;  // header
      throw FormatError("lexicon line " + std::to_string(line_no) + ": non-numeric score");
    }
    auto term = lower(f[0]);
    if (term.empty()) throw FormatError("lexicon line " + std::to_string(line_no) + ": empty term");
    if (!seen.insert(term).second) throw FormatError("duplicate lexicon term: " + term);
    lex.terms.push_back({std::move(term), {*v, *a, *d}});
  }
  if (declared) {
    lex.min.fill(declared->first);
    lex.max.fill(declared->second);
  } else if (!lex.terms.empty()) {
    lex.min = lex.max = lex.terms[0].vad;
    for (const auto& t : lex.terms)
      for (int k = 0; k < 3; ++k) {
        lex.min[k] = std::min(lex.min[k], t.vad[k]);
        lex.max[k] = std::max(lex.max[k], t.vad[k]);
      }
  }
  return lex;
}

VadLexicon load_vad_tsv(const std::filesystem::path& path) { return parse_vad_tsv(read_file(path)); }

double sentiment_score(const Probabilities& p) {
  if (p.positive < 0 || p.neutral < 0 || p.negative < 0) throw InvalidArgument("class probabilities must be >= 0");
  const double total = p.positive + p.neutral + p.negative;
  if (!(total > 0)) throw InvalidArgument("class probabilities sum to zero");
  return (p.positive - p.negative) / total;
}

std::map<std::string, Probabilities> parse_probabilities_jsonl(std::string_view content) {
  std::map<std::string, Probabilities> out;
  std::stringstream ss{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      const auto id = j.at("id").get<std::string>();
      Probabilities p{j.at("p_pos").get<double>(), j.at("p_neu").get<double>(), j.at("p_neg").get<double>()};
      if (!out.emplace(id, p).second) throw FormatError("duplicate id " + id);
    } catch (const json::exception& e) {
      throw FormatError("probabilities line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::map<std::string, Probabilities> load_probabilities(const std::filesystem::path& path) {
  return parse_probabilities_jsonl(read_file(path));
}

std::vector<Probabilities> classify_remote(std::span<const std::string> texts, const ClassifierConfig& config) {
  if (config.endpoint.empty()) throw InvalidArgument("classifier endpoint is required");
  const auto url = http::parse_url(config.endpoint);
  const auto headers = http::bearer_from_env(config.auth_env);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(config.timeout_seconds * 1000));
  std::vector<Probabilities> out;
  for (std::size_t lo = 0; lo < texts.size(); lo += std::max<std::size_t>(1, config.batch_size)) {
    const auto hi = std::min(texts.size(), lo + std::max<std::size_t>(1, config.batch_size));
    json body{{"model", config.model}, {"inputs", json::array()}};
    for (std::size_t i = lo; i < hi; ++i) body["inputs"].push_back(texts[i]);
    http::Response r;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(500) * (1ll << (attempt - 1)));
      r = http::post_json(url, body.dump(), headers, timeout);
      if (r.ok() || !http::retryable(r)) break;
    }
    if (!r.ok()) throw Error("classification request failed: HTTP " + std::to_string(r.status) + " " + r.error);
    try {
      const auto reply = json::parse(r.body);
      if (!reply.is_array() || reply.size() != hi - lo) throw FormatError("classifier returned wrong item count");
      for (const auto& item : reply) {
        Probabilities p;
        for (const auto& entry : item) {
          const auto label = lower(entry.at("label").get<std::string>());
          const double score = entry.at("score").get<double>();
          if (label.rfind("pos", 0) == 0) p.positive = score;
          else if (label.rfind("neu", 0) == 0) p.neutral = score;
          else if (label.rfind("neg", 0) == 0) p.negative = score;
        }
        out.push_back(p);
      }
    } catch (const json::exception& e) {
      throw FormatError(std::string("classifier response malformed: ") + e.what());
    }
  }
  return out;
}

std::vector<double> scores_for(const std::map<std::string, Probabilities>& probs,
                               const corpus::RegimeAssignment& assignment) {
  std::vector<double> out;
  out.reserve(assignment.size());
  for (const auto& id : assignment.ids()) {
    auto it = probs.find(id);
    if (it == probs.end()) throw InvalidArgument("no class probabilities for document " + id);
    out.push_back(sentiment_score(it->second));
  }
  return out;
}

GapReport regime_sentiment_gap(std::span<const double> scores, const corpus::RegimeAssignment& assignment,
                               const cluster::Partition* partition) {
  if (scores.size() != assignment.size()) throw InvalidArgument("scores do not cover every document");
  if (partition && partition->community_of.size() != scores.size())
    throw InvalidArgument("partition does not cover every document");
  GapReport r;
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) (assignment[i] == corpus::Regime::A ? sa : sb) += scores[i];
  if (assignment.n_a() == 0) throw InvalidArgument("regime A is empty");
  if (assignment.n_b() == 0) throw InvalidArgument("regime B is empty");
  r.mean_a = sa / static_cast<double>(assignment.n_a());
  r.mean_b = sb / static_cast<double>(assignment.n_b());
  r.gap = r.mean_b - r.mean_a;
  if (partition) {
    std::vector<double> ta(partition->count, 0.0), tb(partition->count, 0.0);
    r.topics.resize(partition->count);
    for (std::size_t c = 0; c < partition->count; ++c) r.topics[c].topic = static_cast<std::uint32_t>(c);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const auto c = partition->community_of[i];
      if (assignment[i] == corpus::Regime::A) {
        ta[c] += scores[i];
        ++r.topics[c].n_a;
      } else {
        tb[c] += scores[i];
        ++r.topics[c].n_b;
      }
    }
    for (std::size_t c = 0; c < partition->count; ++c) {
      auto& t = r.topics[c];
      if (t.n_a > 0 && t.n_b > 0) t.gap = tb[c] / static_cast<double>(t.n_b) - ta[c] / static_cast<double>(t.n_a);
    }
  }
  return r;
}

ProjectedLexicon project_lexicon(const VadLexicon& lexicon, const embed::ProviderConfig& provider,
                                 const manifold::ProjectionModel& model) {
  ProjectedLexicon out;
  if (lexicon.terms.empty()) {
    out.coords = MatrixD(0, model.dim());
    return out;
  }
  std::vector<std::string> terms;
  for (const auto& t : lexicon.terms) terms.push_back(t.term);

  std::vector<std::optional<std::vector<float>>> rows(terms.size());
  if (provider.kind == embed::ProviderKind::file) {
    const auto saved = embed::load_embeddings(provider.path);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < saved.ids.size(); ++i) row_of.emplace(saved.ids[i], i);
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (auto it = row_of.find(terms[i]); it != row_of.end()) {
        const auto r = saved.rows.row(it->second);
        rows[i] = std::vector<float>(r.begin(), r.end());
      }
  } else {
    try {
      const auto m = embed::embed_texts(terms, terms, provider);
      for (std::size_t i = 0; i < terms.size(); ++i) rows[i] = std::vector<float>(m.rows.row(i).begin(), m.rows.row(i).end());
    } catch (const std::exception& batch_error) {
      log::warn(std::string("batch term embedding failed, retrying term by term: ") + batch_error.what());
      for (std::size_t i = 0; i < terms.size(); ++i) {
        try {
          const auto m = embed::embed_texts(std::span(terms).subspan(i, 1), std::span(terms).subspan(i, 1), provider);
          rows[i] = std::vector<float>(m.rows.row(0).begin(), m.rows.row(0).end());
        } catch (const std::exception&) {
        }
      }
    }
  }

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]) kept.push_back(i);
    else log::warn("lexicon term skipped (no embedding): " + terms[i]);
  }
  out.skipped = rows.size() - kept.size();
  if (kept.empty()) {
    out.coords = MatrixD(0, model.dim());
    return out;
  }
  const std::size_t m = rows[kept[0]]->size();
  MatrixF x(kept.size(), m);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    if (rows[kept[r]]->size() != m) throw FormatError("term embeddings differ in dimension");
    std::copy(rows[kept[r]]->begin(), rows[kept[r]]->end(), x.row(r).begin());
    out.terms.push_back(terms[kept[r]]);
    out.vad.push_back(lexicon.terms[kept[r]].vad);
  }
  out.coords = manifold::transform(model, x).cast<double>();
  return out;
}

std::vector<VadCommunity> cluster_lexicon(const ProjectedLexicon& projected, double resolution, std::uint64_t seed,
                                          std::size_t k_graph) {
  const std::size_t n = projected.terms.size();
  if (n == 0) throw InvalidArgument("lexicon clustering needs at least one term");
  cluster::Partition partition;
  if (n == 1) {
    partition = cluster::Partition{{0}, 1};
  } else {
    const auto graph =
        cluster::graph_from_projection(projected.coords.cast<float>(), std::min(k_graph, n - 1));
    cluster::LeidenOptions lo;
    lo.resolution = resolution;
    lo.seed = seed;
    partition = cluster::leiden(graph, lo);
  }
  std::vector<VadCommunity> out(partition.count);
  std::vector<std::size_t> count(partition.count, 0);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c].id = static_cast<std::uint32_t>(c);
    out[c].centroid.assign(projected.coords.cols(), 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& com = out[partition.community_of[i]];
    com.terms.push_back(projected.terms[i]);
    const auto r = projected.coords.row(i);
    for (std::size_t c = 0; c < r.size(); ++c) com.centroid[c] += r[c];
    for (int k = 0; k < 3; ++k) com.mean_vad[k] += projected.vad[i][k];
    ++count[partition.community_of[i]];
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    const double inv = 1.0 / static_cast<double>(count[c]);
    for (auto& x : out[c].centroid) x *= inv;
    for (auto& x : out[c].mean_vad) x *= inv;
  }
  return out;
}

std::uint32_t assign_endpoint(std::span<const double> endpoint, std::span<const VadCommunity> communities) {
  if (communities.empty()) throw InvalidArgument("no lexicon communities to assign to");
  if (stats::norm(endpoint) == 0) throw InvalidArgument("cannot assign a zero endpoint vector");
  std::uint32_t best = communities[0].id;
  double best_sim = -2;
  for (const auto& c : communities) {
    if (c.centroid.size() != endpoint.size()) throw InvalidArgument("endpoint and centroid dimensions differ");
    const double sim = stats::norm(c.centroid) > 0 ? stats::cosine(endpoint, c.centroid) : 0.0;
    if (sim > best_sim || (sim == best_sim && c.id < best)) {
      best_sim = sim;
      best = c.id;
    }
  }
  return best;
}

std::vector<VadShift> vad_shift(const field::PolarityField& field, std::span<const VadCommunity> communities) {
  std::map<std::uint32_t, const VadCommunity*> by_id;
  for (const auto& c : communities) by_id[c.id] = &c;
  std::vector<VadShift> out;
  for (const auto* t : field.eligible()) {
    VadShift s;
    s.topic = t->topic;
    s.community_a = assign_endpoint(t->centroids.mu_a, communities);
    s.community_b = assign_endpoint(t->centroids.mu_b, communities);
    for (int k = 0; k < 3; ++k) s.delta[k] = by_id[s.community_b]->mean_vad[k] - by_id[s.community_a]->mean_vad[k];
    out.push_back(s);
  }
  return out;
}

json to_json(const GapReport& r) {
  json topics = json::array();
  for (const auto& t : r.topics)
    topics.push_back({{"topic", t.topic}, {"n_A", t.n_a}, {"n_B", t.n_b}, {"gap", t.gap ? json(*t.gap) : json(nullptr)}});
  return {{"mean_A", r.mean_a}, {"mean_B", r.mean_b}, {"gap", r.gap}, {"topics", std::move(topics)}};
}

json to_json(std::span<const VadShift> shifts, std::span<const VadCommunity> communities) {
  json cs = json::array();
  for (const auto& c : communities)
    cs.push_back({{"id", c.id}, {"size", c.terms.size()}, {"mean_vad", c.mean_vad}, {"centroid", c.centroid}});
  json ss = json::array();
  for (const auto& s : shifts)
    ss.push_back({{"topic", s.topic},
                  {"community_A", s.community_a},
                  {"community_B", s.community_b},
                  {"delta", {{"valence", s.delta[0]}, {"arousal", s.delta[1]}, {"dominance", s.delta[2]}}}});
  return {{"communities", std::move(cs)}, {"shifts", std::move(ss)}};
}

}  // namespace topol::lexicon
