#include "topol/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <set>
#include <sstream>

#include "topol/checksum.hpp"
#include "topol/cluster.hpp"
#include "topol/field.hpp"
#include "topol/log.hpp"
#include "topol/rng.hpp"

namespace topol::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument("config " + key + ": not an integer: " + v);
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("config " + key + ": not a number: " + v);
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config " + key + ": not a boolean: " + v);
}

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string key_of(std::initializer_list<std::string> parts) {
  std::string joined;
  for (const auto& p : parts) {
    joined += p;
    joined.push_back('\x1f');
  }
  return sha256_hex(joined);
}

const std::vector<std::string> kKeys = {
    "auth_env",        "batch_size",        "boundary",           "corpus",        "d",
    "dim",             "embeddings_file",   "endpoint",           "explain_auth_env", "explain_endpoint",
    "explain_max_tokens", "explain_model",  "explain_n",          "explain_script", "explain_temperature",
    "explain_token_budget", "format",       "grid",               "k",             "lexicon",
    "lexicon_embeddings", "max_in_flight",  "max_retries",        "metric",        "min_dist",
    "model",           "N",                 "n_epochs",           "normalize",     "out",
    "probabilities",   "provider",          "r",                  "seed",          "tau",
    "timeout"};

}  // namespace

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& values) {
  RunConfig c;
  const std::set<std::string> known(kKeys.begin(), kKeys.end());
  for (const auto& [key, raw] : values) {
    if (!known.count(key)) throw InvalidArgument("unknown config key: " + key);
    const auto& v = raw;
    if (key == "corpus") c.corpus = v;
    else if (key == "format") c.format = corpus::parse_format(v);
    else if (key == "provider") c.provider.kind = embed::parse_provider_kind(v);
    else if (key == "endpoint") c.provider.endpoint = v;
    else if (key == "model") c.provider.model = v;
    else if (key == "batch_size") c.provider.batch_size = parse_unsigned<std::size_t>(key, v);
    else if (key == "max_retries") c.provider.max_retries = parse_unsigned<int>(key, v);
    else if (key == "timeout") c.provider.timeout_seconds = parse_double(key, v);
    else if (key == "auth_env") c.provider.auth_env = v;
    else if (key == "max_in_flight") c.provider.max_in_flight = parse_unsigned<std::size_t>(key, v);
    else if (key == "embeddings_file") c.provider.path = v;
    else if (key == "dim") c.provider.dim = parse_unsigned<std::size_t>(key, v);
    else if (key == "normalize") c.provider.normalize = parse_bool(key, v);
    else if (key == "d") c.d = parse_unsigned<std::size_t>(key, v);
    else if (key == "k") c.k = parse_unsigned<std::size_t>(key, v);
    else if (key == "r") c.r = parse_double(key, v);
    else if (key == "tau") c.tau = parse_unsigned<std::size_t>(key, v);
    else if (key == "N") c.permutations = parse_unsigned<std::size_t>(key, v);
    else if (key == "seed") c.seed = parse_unsigned<std::uint64_t>(key, v);
    else if (key == "boundary") c.boundary = v;
    else if (key == "out") c.out = v;
    else if (key == "min_dist") c.min_dist = parse_double(key, v);
    else if (key == "n_epochs") c.n_epochs = parse_unsigned<int>(key, v);
    else if (key == "metric") c.metric = manifold::parse_metric(v);
    else if (key == "grid") c.grid = v;
    else if (key == "explain_endpoint") c.explainer.endpoint = v;
    else if (key == "explain_model") c.explainer.model = v;
    else if (key == "explain_auth_env") c.explainer.auth_env = v;
    else if (key == "explain_n") c.explainer.n = parse_unsigned<std::size_t>(key, v);
    else if (key == "explain_temperature") c.explainer.temperature = parse_double(key, v);
    else if (key == "explain_max_tokens") c.explainer.max_output_tokens = parse_unsigned<int>(key, v);
    else if (key == "explain_token_budget") c.explainer.doc_token_budget = parse_unsigned<std::size_t>(key, v);
    else if (key == "explain_script") c.explain_script = v;
    else if (key == "lexicon") c.lexicon = v;
    else if (key == "lexicon_embeddings") c.lexicon_embeddings = v;
    else if (key == "probabilities") c.probabilities = v;
  }
  if (c.r <= 0) throw InvalidArgument("config r: resolution must be positive");
  if (c.tau < 1) throw InvalidArgument("config tau: must be at least 1");
  if (c.d < 2) throw InvalidArgument("config d: must be at least 2");
  if (c.k < 1) throw InvalidArgument("config k: must be at least 1");
  if (c.explainer.n < 1) throw InvalidArgument("config explain_n: must be at least 1");
  return c;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  return {{"auth_env", provider.auth_env},
          {"batch_size", std::to_string(provider.batch_size)},
          {"boundary", boundary},
          {"corpus", corpus.string()},
          {"d", std::to_string(d)},
          {"dim", std::to_string(provider.dim)},
          {"embeddings_file", provider.path.string()},
          {"endpoint", provider.endpoint},
          {"explain_auth_env", explainer.auth_env},
          {"explain_endpoint", explainer.endpoint},
          {"explain_max_tokens", std::to_string(explainer.max_output_tokens)},
          {"explain_model", explainer.model},
          {"explain_n", std::to_string(explainer.n)},
          {"explain_script", explain_script.string()},
          {"explain_temperature", fmt_double(explainer.temperature)},
          {"explain_token_budget", std::to_string(explainer.doc_token_budget)},
          {"format", format == corpus::Format::jsonl ? "jsonl" : "csv"},
          {"grid", grid},
          {"k", std::to_string(k)},
          {"lexicon", lexicon.string()},
          {"lexicon_embeddings", lexicon_embeddings.string()},
          {"max_in_flight", std::to_string(provider.max_in_flight)},
          {"max_retries", std::to_string(provider.max_retries)},
          {"metric", manifold::to_string(metric)},
          {"min_dist", fmt_double(min_dist)},
          {"model", provider.model},
          {"N", std::to_string(permutations)},
          {"n_epochs", std::to_string(n_epochs)},
          {"normalize", provider.normalize ? "true" : "false"},
          {"out", out.string()},
          {"probabilities", probabilities.string()},
          {"provider", embed::to_string(provider.kind)},
          {"r", fmt_double(r)},
          {"seed", std::to_string(seed)},
          {"tau", std::to_string(tau)},
          {"timeout", fmt_double(provider.timeout_seconds)}};
}

manifold::UmapParams RunConfig::umap_params() const {
  manifold::UmapParams p;
  p.n_components = d;
  p.n_neighbors = k;
  p.min_dist = min_dist;
  p.n_epochs = n_epochs;
  p.metric = metric;
  return p;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const auto body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(body.substr(0, eq));
    if (key.empty()) throw FormatError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = trim(body.substr(eq + 1));
  }
  return out;
}

std::string format_config_text(const std::map<std::string, std::string>& values) {
  std::string out;
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

std::map<std::string, std::string> merge_config(std::map<std::string, std::string> file,
                                                const std::map<std::string, std::string>& flags) {
  for (const auto& [k, v] : flags) file[k] = v;
  return file;
}

RunLock::RunLock(const fs::path& dir) : path_(dir / ".lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw Error("run directory " + dir.string() + " is locked by another command (" + path_.string() + ")");
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

json RunManifest::to_json() const {
  json stages_j = json::object();
  for (const auto& [name, s] : stages)
    stages_j[name] = {{"key", s.key}, {"outputs", s.outputs}, {"started", s.started}, {"finished", s.finished},
                      {"cache_hit", s.cache_hit}};
  return {{"version", version}, {"config", config}, {"stages", stages_j}, {"artifacts", artifacts}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    m.version = j.at("version").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
    for (const auto& [name, s] : j.at("stages").items()) {
      StageRecord r;
      r.key = s.at("key").get<std::string>();
      r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
      r.started = s.at("started").get<std::string>();
      r.finished = s.at("finished").get<std::string>();
      r.cache_hit = s.at("cache_hit").get<bool>();
      m.stages[name] = std::move(r);
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

RunManifest RunManifest::load(const fs::path& dir) {
  const auto path = dir / "manifest.json";
  if (!fs::exists(path)) throw InvalidArgument("no manifest in " + dir.string() + "; run `topol run` first");
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not JSON: ") + e.what());
  }
}

void RunManifest::save(const fs::path& dir) const { write_file_atomic(dir / "manifest.json", to_json().dump(2) + "\n"); }

std::vector<std::string> RunManifest::verify(const fs::path& dir) const {
  std::vector<std::string> bad;
  for (const auto& [file, sum] : artifacts) {
    const auto p = dir / file;
    if (!fs::exists(p) || sha256_file(p) != sum) bad.push_back(file);
  }
  return bad;
}

namespace {

class Run {
 public:
  Run(fs::path dir, RunManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

  // Runs `body` unless a previous run recorded the same key and every output still matches.
  bool stage(const std::string& name, const std::string& key, const std::vector<std::string>& outputs,
             const std::function<void()>& body) {
    auto it = manifest_.stages.find(name);
    if (it != manifest_.stages.end() && it->second.key == key && outputs_valid(it->second, outputs)) {
      it->second.cache_hit = true;
      return false;
    }
    StageRecord rec;
    rec.key = key;
    rec.started = now_iso();
    try {
      body();
    } catch (const std::exception& e) {
      manifest_.stages.erase(name);
      manifest_.save(dir_);
      throw Error("stage " + name + " failed: " + e.what());
    }
    for (const auto& o : outputs) {
      rec.outputs[o] = sha256_file(dir_ / o);
      manifest_.artifacts[o] = rec.outputs[o];
    }
    rec.finished = now_iso();
    manifest_.stages[name] = rec;
    manifest_.save(dir_);
    return true;
  }

  std::string sum(const std::string& file) const { return manifest_.artifacts.at(file); }
  void track(const std::string& file) { manifest_.artifacts[file] = sha256_file(dir_ / file); }
  RunManifest& manifest() { return manifest_; }
  const fs::path& dir() const { return dir_; }

 private:
  bool outputs_valid(const StageRecord& rec, const std::vector<std::string>& outputs) const {
    for (const auto& o : outputs) {
      auto it = rec.outputs.find(o);
      if (it == rec.outputs.end() || !fs::exists(dir_ / o) || sha256_file(dir_ / o) != it->second) return false;
    }
    return true;
  }

  fs::path dir_;
  RunManifest manifest_;
};

std::string boundary_key(const std::string& boundary) {
  if (boundary.rfind("list:", 0) == 0) return boundary + "|" + sha256_file(boundary.substr(5));
  return boundary;
}

struct Loaded {
  RunConfig config;
  RunManifest manifest;
  embed::EmbeddingMatrix embeddings;
  MatrixD coords;
  cluster::Partition partition;
  std::optional<corpus::RegimeAssignment> assignment;
  field::PolarityField field;
};

Loaded load_run(const fs::path& dir, bool need_field = true) {
  Loaded l;
  l.manifest = RunManifest::load(dir);
  if (auto bad = l.manifest.verify(dir); !bad.empty())
    throw FormatError("run artifact checksum mismatch: " + bad.front() + " (rerun `topol run`)");
  l.config = RunConfig::from_map(l.manifest.config);
  l.embeddings = embed::load_embeddings(dir / "embeddings.bin");
  l.coords = embed::load_matrix(dir / "projection.bin").matrix.cast<double>();
  l.partition = cluster::partition_from_csv(read_file(dir / "partition.csv"), l.embeddings.ids);
  if (need_field) {
    if (!fs::exists(dir / "field.json")) throw InvalidArgument("run has no field; the field stage did not complete");
    l.assignment = corpus::assignment_from_csv(read_file(dir / "assignment.csv"));
    l.field = field::field_from_json(json::parse(read_file(dir / "field.json")));
  }
  return l;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace

RunManifest cmd_run(const RunConfig& config) {
  if (config.corpus.empty()) throw InvalidArgument("config corpus is required");
  if (config.boundary.empty()) throw InvalidArgument("config boundary is required");
  if (config.out.empty()) throw InvalidArgument("config out is required");
  const fs::path dir = config.out;
  RunLock lock(dir);
  RunManifest manifest;
  if (fs::exists(dir / "manifest.json")) manifest = RunManifest::load(dir);
  manifest.config = config.to_map();
  manifest.version = kVersion;
  Run run(dir, std::move(manifest));
  write_file_atomic(dir / "config.snapshot", format_config_text(config.to_map()));
  run.track("config.snapshot");

  const auto corpus_hash = sha256_file(config.corpus);
  const auto corp = corpus::load_corpus(config.corpus, config.format);
  const auto& pv = config.provider;

  embed::EmbeddingMatrix emb;
  const std::string embed_key =
      key_of({"embed", corpus_hash, embed::to_string(pv.kind), pv.model, pv.endpoint, std::to_string(pv.dim),
              pv.normalize ? "1" : "0", pv.kind == embed::ProviderKind::file ? sha256_file(pv.path) : ""});
  if (!run.stage("embed", embed_key, {"embeddings.bin", "embeddings.bin.json"}, [&] {
        emb = embed::embed_corpus(corp, pv);
        embed::save_embeddings(emb, dir / "embeddings.bin");
      })) {
    emb = embed::load_embeddings(dir / "embeddings.bin");
    embed::check_alignment(emb, corp.ids());
  }
  const auto training = std::make_shared<const MatrixF>(emb.rows);

  manifold::ProjectionModel model;
  const auto params = config.umap_params();
  const std::string project_key =
      key_of({"project", run.sum("embeddings.bin"), std::to_string(config.d), std::to_string(config.k),
              fmt_double(config.min_dist), std::to_string(config.n_epochs), manifold::to_string(config.metric),
              std::to_string(config.seed)});
  if (!run.stage("project", project_key, {"projection.bin", "projection.bin.json"}, [&] {
        model = manifold::fit_umap(emb.rows, params, derive_seed(config.seed, 10), emb.ids);
        manifold::save_projection(model, dir / "projection.bin");
      })) {
    model = manifold::load_projection(dir / "projection.bin", training);
  }
  const auto coords = model.coords.cast<double>();

  cluster::Partition partition;
  const std::string cluster_key = key_of({"cluster", run.sum("projection.bin"), std::to_string(config.k),
                                          fmt_double(config.r), std::to_string(config.seed)});
  if (!run.stage("cluster", cluster_key, {"partition.csv"}, [&] {
        const auto graph = cluster::graph_from_projection(model.coords, config.k);
        cluster::LeidenOptions lo;
        lo.resolution = config.r;
        lo.seed = derive_seed(config.seed, 11);
        partition = cluster::leiden(graph, lo);
        write_file_atomic(dir / "partition.csv", cluster::partition_to_csv(partition, emb.ids));
      })) {
    partition = cluster::partition_from_csv(read_file(dir / "partition.csv"), emb.ids);
  }

  const std::string field_key = key_of({"field", run.sum("projection.bin"), run.sum("partition.csv"), corpus_hash,
                                        boundary_key(config.boundary), std::to_string(config.tau)});
  run.stage("field", field_key, {"assignment.csv", "field.json"}, [&] {
    const auto spec = corpus::parse_boundary(config.boundary);
    const auto assignment = corpus::apply_boundary(corp, spec);
    write_file_atomic(dir / "assignment.csv", corpus::assignment_to_csv(assignment));
    const auto f = field::build_field(partition, assignment, coords, config.tau, corpus::describe(spec));
    write_json(dir / "field.json", field::to_json(f));
  });

  run.stage("stats", key_of({"stats", run.sum("field.json")}), {"stats.json"}, [&] {
    const auto f = field::field_from_json(json::parse(read_file(dir / "field.json")));
    json j;
    if (f.eligible_count() >= 2) {
      j = stats::to_json(stats::field_stats(f));
    } else {
      j = {{"eligible", f.eligible_count()}, {"m_bar", stats::mean_magnitude(f)}, {"s_bar", nullptr},
           {"note", "s_bar needs at least two eligible topics"}};
    }
    j["communities"] = f.topics.size();
    write_json(dir / "stats.json", j);
  });

  run.manifest().save(dir);
  return run.manifest();
}

stats::PermutationReport cmd_permtest(const fs::path& dir, std::optional<std::size_t> permutations,
                                      std::optional<std::uint64_t> seed) {
  RunLock lock(dir);
  auto l = load_run(dir);
  const auto n = permutations.value_or(l.config.permutations);
  const auto s = seed.value_or(l.config.seed);
  auto report = stats::permutation_test(l.coords, l.partition, *l.assignment, l.config.tau, n, derive_seed(s, 20));
  report.seed = s;
  write_json(dir / "permtest.json", stats::to_json(report));
  l.manifest.artifacts["permtest.json"] = sha256_file(dir / "permtest.json");
  l.manifest.save(dir);
  return report;
}

stats::SweepResult cmd_sweep(const fs::path& dir, const std::string& grid_text) {
  RunLock lock(dir);
  auto l = load_run(dir);
  const auto text = grid_text.empty() ? l.config.grid : grid_text;
  const auto grid = text.empty() ? stats::default_grid() : stats::parse_grid(text);
  stats::SweepOptions opt;
  opt.base = l.config.umap_params();
  opt.tau = l.config.tau;
  opt.permutations = l.config.permutations;
  opt.seed = l.config.seed;
  auto result = stats::robustness_sweep(l.embeddings, *l.assignment, grid, opt);
  write_json(dir / "sweep.json", stats::to_json(result));
  write_file_atomic(dir / "sweep.txt", stats::render_table(result));
  l.manifest.artifacts["sweep.json"] = sha256_file(dir / "sweep.json");
  l.manifest.artifacts["sweep.txt"] = sha256_file(dir / "sweep.txt");
  l.manifest.save(dir);
  return result;
}

std::vector<explain::Explanation> cmd_explain(const fs::path& dir, const std::vector<std::uint32_t>& topics,
                                              explain::ChatClient* client) {
  RunLock lock(dir);
  auto l = load_run(dir);
  const auto corp = corpus::load_corpus(l.config.corpus, l.config.format);
  const auto clusters = field::split_clusters(l.partition, l.embeddings.ids, *l.assignment);
  std::vector<std::uint32_t> wanted = topics;
  if (wanted.empty())
    for (const auto* t : l.field.eligible()) wanted.push_back(t->topic);
  std::vector<explain::NeighborhoodPair> pairs;
  for (auto t : wanted) {
    if (t >= l.field.topics.size()) throw InvalidArgument("no topic " + std::to_string(t));
    pairs.push_back(explain::select_neighborhoods(l.field.topics[t], clusters[t], l.coords, l.config.explainer.n));
  }
  std::unique_ptr<explain::ChatClient> owned;
  if (!client) {
    if (!l.config.explain_script.empty())
      owned = explain::ScriptedChatClient::from_file(l.config.explain_script);
    else
      owned = std::make_unique<explain::HttpChatClient>(l.config.explainer);
    client = owned.get();
  }
  std::vector<std::string> errors;
  auto out = explain::explain_many(pairs, corp, l.config.explainer, *client, errors);
  fs::create_directories(dir / "explain");
  std::string failed;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto name = "explain/" + std::to_string(pairs[i].topic) + ".json";
    if (!errors[i].empty()) {
      failed += (failed.empty() ? "" : "; ") + errors[i];
      continue;
    }
    write_file_atomic(dir / name, explain::to_json(out[i]).dump(2) + "\n");
    l.manifest.artifacts[name] = sha256_file(dir / name);
  }
  l.manifest.save(dir);
  if (!failed.empty()) throw Error("explanation failed: " + failed);
  return out;
}

VadReport cmd_vad(const fs::path& dir, const fs::path& lexicon_path, const std::optional<fs::path>& probabilities) {
  RunLock lock(dir);
  auto l = load_run(dir);
  const auto training = std::make_shared<const MatrixF>(l.embeddings.rows);
  const auto model = manifold::load_projection(dir / "projection.bin", training);
  auto provider = l.config.provider;
  if (!l.config.lexicon_embeddings.empty()) {
    provider.kind = embed::ProviderKind::file;
    provider.path = l.config.lexicon_embeddings;
  }
  const auto lex = lexicon::load_vad_tsv(lexicon_path);
  const auto projected = lexicon::project_lexicon(lex, provider, model);
  VadReport rep;
  rep.skipped_terms = projected.skipped;
  rep.communities = lexicon::cluster_lexicon(projected, l.config.r, derive_seed(l.config.seed, 30));
  rep.shifts = lexicon::vad_shift(l.field, rep.communities);
  auto j = lexicon::to_json(rep.shifts, rep.communities);
  j["skipped_terms"] = rep.skipped_terms;
  if (probabilities) {
    const auto probs = lexicon::load_probabilities(*probabilities);
    const auto scores = lexicon::scores_for(probs, *l.assignment);
    rep.gap = lexicon::regime_sentiment_gap(scores, *l.assignment, &l.partition);
    j["sentiment_gap"] = lexicon::to_json(*rep.gap);
  }
  write_json(dir / "vad.json", j);
  l.manifest.artifacts["vad.json"] = sha256_file(dir / "vad.json");
  l.manifest.save(dir);
  return rep;
}

std::string render_svg(const MatrixD& coords2d, const corpus::RegimeAssignment& assignment,
                       const cluster::Partition& partition, const field::PolarityField& field) {
  if (coords2d.cols() != 2) throw InvalidArgument("SVG rendering needs 2-D coordinates");
  if (coords2d.rows() != assignment.size()) throw InvalidArgument("coordinates do not match the assignment");
  const auto f2 = field::build_field(partition, assignment, coords2d, field.tau);
  double lo[2] = {coords2d(0, 0), coords2d(0, 1)}, hi[2] = {lo[0], lo[1]};
  for (std::size_t i = 0; i < coords2d.rows(); ++i)
    for (int c = 0; c < 2; ++c) {
      lo[c] = std::min(lo[c], coords2d(i, c));
      hi[c] = std::max(hi[c], coords2d(i, c));
    }
  constexpr double size = 800, margin = 40;
  const double span = std::max({hi[0] - lo[0], hi[1] - lo[1], 1e-9});
  auto px = [&](double x) { return margin + (x - lo[0]) / span * (size - 2 * margin); };
  auto py = [&](double y) { return size - margin - (y - lo[1]) / span * (size - 2 * margin); };
  char buf[256];
  std::string s =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"800\" viewBox=\"0 0 800 800\">\n"
      "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" "
      "orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#ffd700\"/></marker></defs>\n"
      "<rect width=\"800\" height=\"800\" fill=\"#202020\"/>\n"
      "<text x=\"40\" y=\"24\" fill=\"#dddddd\" font-family=\"sans-serif\" font-size=\"14\">"
      "Polarity field, separate 2-D projection (illustrative)</text>\n<g class=\"points\">\n";
  for (std::size_t i = 0; i < coords2d.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"%s\" fill-opacity=\"0.7\"/>\n",
                  px(coords2d(i, 0)), py(coords2d(i, 1)), assignment[i] == corpus::Regime::A ? "#1f77b4" : "#d62728");
    s += buf;
  }
  s += "</g>\n<g class=\"field\">\n";
  for (const auto& t : f2.topics) {
    if (t.topic >= field.topics.size() || !field.topics[t.topic].eligible || !t.eligible) continue;
    const double ax = px(t.centroids.mu_a[0]), ay = py(t.centroids.mu_a[1]);
    const double bx = px(t.centroids.mu_b[0]), by = py(t.centroids.mu_b[1]);
    for (auto [x, y] : {std::pair{ax, ay}, std::pair{bx, by}}) {
      std::snprintf(buf, sizeof buf,
                    "<rect class=\"centroid\" x=\"%.2f\" y=\"%.2f\" width=\"8\" height=\"8\" fill=\"#ffffff\" "
                    "stroke=\"#000000\"/>\n",
                    x - 4, y - 4);
      s += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<line class=\"arrow\" data-topic=\"%u\" x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" "
                  "stroke=\"#ffd700\" stroke-width=\"2\" marker-end=\"url(#head)\"/>\n",
                  t.topic, ax, ay, bx, by);
    s += buf;
  }
  s += "</g>\n</svg>\n";
  return s;
}

std::string cmd_render(const fs::path& dir) {
  RunLock lock(dir);
  auto l = load_run(dir);
  auto params = l.config.umap_params();
  params.n_components = 2;
  const auto viz = manifold::fit_umap(l.embeddings.rows, params, derive_seed(l.config.seed, 40), l.embeddings.ids);
  const auto svg = render_svg(viz.coords.cast<double>(), *l.assignment, l.partition, l.field);
  write_file_atomic(dir / "report.svg", svg);
  l.manifest.artifacts["report.svg"] = sha256_file(dir / "report.svg");
  l.manifest.save(dir);
  return svg;
}

std::string cmd_inspect(const fs::path& dir, bool& ok) {
  const auto m = RunManifest::load(dir);
  std::string out = "run " + dir.string() + " (version " + m.version + ")\n";
  out += "config:\n";
  for (const auto& [k, v] : m.config)
    if (!v.empty()) out += "  " + k + " = " + v + "\n";
  out += "stages:\n";
  for (const auto& [name, s] : m.stages)
    out += "  " + name + "  key " + s.key.substr(0, 12) + "  " + s.finished + (s.cache_hit ? "  (cached)" : "") + "\n";
  const auto bad = m.verify(dir);
  ok = bad.empty();
  out += "artifacts: " + std::to_string(m.artifacts.size()) + " tracked, " + std::to_string(bad.size()) + " invalid\n";
  for (const auto& b : bad) out += "  checksum mismatch: " + b + "\n";
  if (fs::exists(dir / "stats.json")) {
    const auto st = json::parse(read_file(dir / "stats.json"));
    out += "eligible topics: " + st.at("eligible").dump() + " of " + st.value("communities", json(0)).dump() +
           ", m_bar " + st.at("m_bar").dump() + ", s_bar " + st.at("s_bar").dump() + "\n";
  }
  return out;
}

}  // namespace topol::pipeline
