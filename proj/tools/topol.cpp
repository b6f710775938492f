#include <cstdio>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "topol/checksum.hpp"
#include "topol/pipeline.hpp"
#include "topol/synth.hpp"

namespace {

using namespace topol;

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "Flat key = value config file; flags override it");
    const std::vector<std::pair<std::string, std::string>> keys = {
        {"corpus", "Corpus file"},
        {"format", "Corpus format: jsonl or csv"},
        {"provider", "Embedding provider: synthetic, file or remote"},
        {"endpoint", "Remote embeddings URL (OpenAI-compatible)"},
        {"model", "Remote embedding model name"},
        {"batch_size", "Remote batch size"},
        {"max_retries", "Remote retry count"},
        {"timeout", "Remote request timeout in seconds"},
        {"auth_env", "Environment variable holding the bearer token"},
        {"max_in_flight", "Concurrent remote batches"},
        {"embeddings_file", "Saved embedding matrix for the file provider"},
        {"dim", "Synthetic embedding dimension"},
        {"normalize", "L2-normalize embeddings (true/false)"},
        {"d", "UMAP output dimension (default 50)"},
        {"k", "UMAP neighbors and Leiden graph k (default 100)"},
        {"r", "Leiden resolution (default 1.5)"},
        {"tau", "Minimum documents per regime for an eligible topic (default 3)"},
        {"N", "Random boundaries for the permutation test (default 1000)"},
        {"seed", "Master seed"},
        {"boundary",
         "label:<attr>:<value>=<A|B>,...  |  threshold:<attr>:<cut> (attr < cut is regime A)  |  list:<id,regime csv>"},
        {"out", "Run directory"},
        {"min_dist", "UMAP min_dist"},
        {"n_epochs", "UMAP epochs"},
        {"metric", "Embedding-space metric: cosine or euclidean"},
        {"grid", "Sweep grid d,k,r;d,k,r;..."},
        {"explain_endpoint", "Chat-completions URL"},
        {"explain_model", "Chat model name"},
        {"explain_auth_env", "Environment variable with the chat API token"},
        {"explain_n", "Documents per side in each neighborhood (default 25)"},
        {"explain_temperature", "Chat temperature"},
        {"explain_max_tokens", "Chat output token limit"},
        {"explain_token_budget", "Per-document token budget before truncation"},
        {"explain_script", "Scripted replies for the offline mock client"},
        {"lexicon", "VAD lexicon TSV"},
        {"lexicon_embeddings", "Saved matrix with one row per lexicon term"},
        {"probabilities", "Class probability JSONL"},
    };
    for (const auto& [key, help] : keys) {
      std::string flag = "--" + key;
      for (auto& c : flag)
        if (c == '_') c = '-';
      options[key] = app.add_option(flag, values[key], help);
    }
  }

  pipeline::RunConfig resolve() const {
    std::map<std::string, std::string> file;
    if (!config_file.empty()) file = pipeline::parse_config_text(read_file(config_file));
    std::map<std::string, std::string> flags;
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) flags[key] = values.at(key);
    return pipeline::RunConfig::from_map(pipeline::merge_config(file, flags));
  }
};

void print_permtest(const stats::PermutationReport& r) {
  std::printf("observed m_bar %.6f over %zu eligible topics\n", r.observed, r.eligible_observed);
  std::printf("random boundaries %zu, at least observed %zu, starved %zu\n", r.permutations, r.at_least_observed,
              r.starved);
  std::printf("random m_bar min %.4f mean %.4f max %.4f\n", r.random_m.min, r.random_m.mean, r.random_m.max);
  std::printf("p = %.6f\n", r.p_value);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic polarity fields from a corpus split by a contextual boundary"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Embed, project, cluster and build the polarity field");
  run_flags.attach(*run);

  std::string run_dir;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  auto* perm = app.add_subcommand("permtest", "Random-boundary permutation test");
  perm->add_option("--run", run_dir, "Run directory")->required();
  auto* perm_n = perm->add_option("--N", permutations, "Number of random boundaries");
  auto* perm_seed = perm->add_option("--seed", seed, "Master seed");

  std::string grid;
  auto* sweep = app.add_subcommand("sweep", "Robustness sweep over (d, k, r)");
  sweep->add_option("--run", run_dir, "Run directory")->required();
  sweep->add_option("--grid", grid, "d,k,r;d,k,r;... (default: the four standard configurations)");

  std::vector<std::uint32_t> topics;
  auto* expl = app.add_subcommand("explain", "Contrastive explanation of polarity vectors");
  expl->add_option("--run", run_dir, "Run directory")->required();
  expl->add_option("--topics", topics, "Topic ids (default: every eligible topic)");

  std::string lexicon_path, probabilities_path;
  auto* vad = app.add_subcommand("vad", "Lexicon-anchored VAD shifts and sentiment gap");
  vad->add_option("--run", run_dir, "Run directory")->required();
  vad->add_option("--lexicon", lexicon_path, "VAD lexicon TSV")->required();
  vad->add_option("--probabilities", probabilities_path, "Class probability JSONL");

  auto* render = app.add_subcommand("render", "Write report.svg from a separate 2-D projection");
  render->add_option("--run", run_dir, "Run directory")->required();

  auto* inspect = app.add_subcommand("inspect", "Summarize a run and audit its checksums");
  inspect->add_option("--run", run_dir, "Run directory")->required();

  synth::PlantedSpec spec;
  std::string synth_out, mode = "independent";
  auto* syn = app.add_subcommand("synth", "Write a planted-shift corpus and its embeddings");
  syn->add_option("--out", synth_out, "Output directory")->required();
  syn->add_option("--topics", spec.topics, "Topic count");
  syn->add_option("--docs", spec.docs_per_topic, "Documents per topic");
  syn->add_option("--dim", spec.dim, "Embedding dimension");
  syn->add_option("--sigma", spec.sigma, "Within-topic noise");
  syn->add_option("--offset", spec.offset_norm, "Norm of the regime B offset");
  syn->add_option("--mode", mode, "independent, shared or none");
  syn->add_option("--seed", spec.seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const auto m = pipeline::cmd_run(run_flags.resolve());
      for (const auto& [name, s] : m.stages) std::printf("%-8s %s\n", name.c_str(), s.cache_hit ? "cached" : "done");
      bool ok = false;
      std::cout << pipeline::cmd_inspect(m.config.at("out"), ok);
      return ok ? 0 : 1;
    }
    if (perm->parsed()) {
      print_permtest(pipeline::cmd_permtest(run_dir, perm_n->count() ? std::optional(permutations) : std::nullopt,
                                            perm_seed->count() ? std::optional(seed) : std::nullopt));
      return 0;
    }
    if (sweep->parsed()) {
      std::cout << stats::render_table(pipeline::cmd_sweep(run_dir, grid));
      return 0;
    }
    if (expl->parsed()) {
      for (const auto& e : pipeline::cmd_explain(run_dir, topics)) {
        std::printf("topic %u: %zu dimensions%s\n", e.topic, e.dimensions.size(), e.reprompted ? " (reprompted)" : "");
        for (const auto& d : e.dimensions)
          std::printf("  %s -> %s  reliability %.2f\n", d.label_a.c_str(), d.label_b.c_str(),
                      explain::reliability(d));
      }
      return 0;
    }
    if (vad->parsed()) {
      const auto rep = pipeline::cmd_vad(
          run_dir, lexicon_path, probabilities_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(probabilities_path));
      std::printf("%zu lexicon communities, %zu terms skipped\n", rep.communities.size(), rep.skipped_terms);
      for (const auto& s : rep.shifts)
        std::printf("topic %u: communities %u -> %u  dV %+.4f dA %+.4f dD %+.4f\n", s.topic, s.community_a,
                    s.community_b, s.delta[0], s.delta[1], s.delta[2]);
      if (rep.gap) std::printf("sentiment gap (B - A): %+.4f\n", rep.gap->gap);
      return 0;
    }
    if (render->parsed()) {
      pipeline::cmd_render(run_dir);
      std::printf("wrote %s/report.svg\n", run_dir.c_str());
      return 0;
    }
    if (inspect->parsed()) {
      bool ok = false;
      std::cout << pipeline::cmd_inspect(run_dir, ok);
      return ok ? 0 : 1;
    }
    if (syn->parsed()) {
      if (mode == "independent") spec.mode = synth::OffsetMode::independent;
      else if (mode == "shared") spec.mode = synth::OffsetMode::shared;
      else if (mode == "none") spec.mode = synth::OffsetMode::none;
      else throw InvalidArgument("unknown offset mode: " + mode);
      const auto pc = synth::planted_corpus(spec);
      std::filesystem::create_directories(synth_out);
      write_file_atomic(std::filesystem::path(synth_out) / "corpus.jsonl", synth::to_jsonl(pc.corpus));
      embed::save_embeddings(pc.embeddings, std::filesystem::path(synth_out) / "embeddings.bin");
      std::printf("wrote %zu documents to %s\n", pc.corpus.size(), synth_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
