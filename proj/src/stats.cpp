#include "topol/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "topol/kernels.hpp"
#include "topol/log.hpp"
#include "topol/rng.hpp"

namespace topol::stats {

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("cannot summarize an empty sequence");
  Summary s{values[0], 0.0, values[0]};
  double sum = 0;
  for (double v : values) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    sum += v;
  }
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("cosine of vectors with different dimensions");
  double dot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  const double c = dot / (norm(a) * norm(b));
  return std::clamp(c, -1.0, 1.0);
}

double mean_magnitude(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw InvalidArgument("mean magnitude needs at least one vector");
  double sum = 0;
  for (const auto& v : vectors) sum += norm(v);
  return sum / static_cast<double>(vectors.size());
}

std::vector<double> pairwise_cosines(std::span<const std::vector<double>> vectors) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (norm(vectors[i]) > 0) usable.push_back(i);
    else log::warn("zero-magnitude polarity vector excluded from pairwise cosine");
  }
  if (usable.size() < 2) throw InvalidArgument("pairwise cosine needs at least two non-zero vectors");
  std::vector<double> out;
  out.reserve(usable.size() * (usable.size() - 1) / 2);
  for (std::size_t x = 0; x < usable.size(); ++x)
    for (std::size_t y = x + 1; y < usable.size(); ++y) out.push_back(cosine(vectors[usable[x]], vectors[usable[y]]));
  return out;
}

double mean_pairwise_cosine(std::span<const std::vector<double>> vectors) {
  const auto c = pairwise_cosines(vectors);
  double sum = 0;
  for (double x : c) sum += x;
  return sum / static_cast<double>(c.size());
}

namespace {

std::vector<std::vector<double>> eligible_vectors(const field::PolarityField& f) {
  std::vector<std::vector<double>> out;
  for (const auto* t : f.eligible()) out.push_back(t->v);
  if (out.empty()) throw InvalidArgument("field has no eligible polarity vectors");
  return out;
}

nlohmann::json summary_json(const Summary& s) { return {{"min", s.min}, {"mean", s.mean}, {"max", s.max}}; }

nlohmann::json optional_summary_json(const std::optional<Summary>& s) {
  return s ? summary_json(*s) : nlohmann::json(nullptr);
}

}  // namespace

double mean_magnitude(const field::PolarityField& f) { return mean_magnitude(eligible_vectors(f)); }

double mean_pairwise_cosine(const field::PolarityField& f) { return mean_pairwise_cosine(eligible_vectors(f)); }

FieldStats field_stats(const field::PolarityField& f) {
  const auto vectors = eligible_vectors(f);
  if (vectors.size() < 2) throw InvalidArgument("field statistics need at least two eligible vectors");
  FieldStats s;
  s.eligible = vectors.size();
  for (const auto& v : vectors) s.magnitudes.push_back(norm(v));
  s.magnitude = summarize(s.magnitudes);
  s.m_bar = mean_magnitude(vectors);
  const auto cos = pairwise_cosines(vectors);
  s.cosine = summarize(cos);
  s.s_bar = s.cosine->mean;
  return s;
}

double p_value(double observed, std::span<const double> null) {
  if (null.empty()) throw InvalidArgument("p-value needs at least one null draw");
  const auto ge = std::count_if(null.begin(), null.end(), [&](double x) { return x >= observed; });
  return (1.0 + static_cast<double>(ge)) / (static_cast<double>(null.size()) + 1.0);
}

PermutationReport permutation_test(const MatrixD& coords, const cluster::Partition& partition,
                                   const corpus::RegimeAssignment& assignment, std::size_t tau,
                                   std::size_t permutations, std::uint64_t seed, bool parallel) {
  if (permutations < 1) throw InvalidArgument("permutation count must be at least 1");
  const auto observed_field = field::build_field(partition, assignment, coords, tau);
  PermutationReport r;
  r.observed = mean_magnitude(observed_field);
  r.eligible_observed = observed_field.eligible_count();
  r.permutations = permutations;
  r.seed = seed;

  kernels::NullProblem problem;
  problem.coords = &coords;
  problem.community = partition.community_of;
  problem.n_communities = partition.count;
  problem.regimes = assignment.regimes();
  problem.tau = tau;
  problem.permutations = permutations;
  problem.seed = seed;
  const auto draws = parallel ? kernels::permutation_null_parallel(problem) : kernels::permutation_null_serial(problem);

  std::vector<double> defined_s;
  for (const auto& d : draws) {
    r.null_m.push_back(d.m_bar);
    r.null_s.push_back(d.s_bar);
    if (d.eligible == 0) ++r.starved;
    if (d.s_defined) defined_s.push_back(d.s_bar);
  }
  if (r.starved > 0)
    log::warn(std::to_string(r.starved) + " of " + std::to_string(permutations) +
              " random boundaries left no eligible topic; recorded as m_bar = 0");
  r.at_least_observed = static_cast<std::size_t>(
      std::count_if(r.null_m.begin(), r.null_m.end(), [&](double x) { return x >= r.observed; }));
  r.p_value = p_value(r.observed, r.null_m);
  r.random_m = summarize(r.null_m);
  if (!defined_s.empty()) r.random_s = summarize(defined_s);
  return r;
}

nlohmann::json to_json(const FieldStats& s) {
  return {{"eligible", s.eligible},
          {"m_bar", s.m_bar},
          {"s_bar", s.s_bar ? nlohmann::json(*s.s_bar) : nlohmann::json(nullptr)},
          {"magnitudes", s.magnitudes},
          {"magnitude", summary_json(s.magnitude)},
          {"cosine", optional_summary_json(s.cosine)}};
}

nlohmann::json to_json(const PermutationReport& r, bool include_null) {
  nlohmann::json j{{"observed_m_bar", r.observed},
                   {"eligible_observed", r.eligible_observed},
                   {"N", r.permutations},
                   {"seed", r.seed},
                   {"at_least_observed", r.at_least_observed},
                   {"starved", r.starved},
                   {"p_value", r.p_value},
                   {"random_m", summary_json(r.random_m)},
                   {"random_s", optional_summary_json(r.random_s)}};
  if (include_null) {
    j["null_m_bar"] = r.null_m;
    nlohmann::json s = nlohmann::json::array();
    for (double x : r.null_s) s.push_back(std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x));
    j["null_s_bar"] = std::move(s);
  }
  return j;
}

Topics project_and_cluster(const embed::EmbeddingMatrix& embeddings, const manifold::UmapParams& params,
                           double resolution, std::uint64_t seed) {
  Topics t;
  t.model = manifold::fit_umap(embeddings.rows, params, derive_seed(seed, 10), embeddings.ids);
  t.coords = t.model.coords.cast<double>();
  const auto graph = cluster::graph_from_projection(t.model.coords, params.n_neighbors);
  cluster::LeidenOptions lo;
  lo.resolution = resolution;
  lo.seed = derive_seed(seed, 11);
  t.partition = cluster::leiden(graph, lo);
  return t;
}

namespace {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace

std::string SweepConfig::label() const {
  return "d=" + std::to_string(d) + " k=" + std::to_string(k) + " r=" + format_number(r);
}

std::vector<SweepConfig> default_grid() { return {{50, 100, 1.5}, {75, 100, 1.5}, {50, 150, 1.5}, {50, 100, 1.0}}; }

std::vector<SweepConfig> parse_grid(std::string_view text) {
  std::vector<SweepConfig> out;
  std::string s(text);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    SweepConfig c;
    char extra = 0;
    if (std::sscanf(item.c_str(), "%zu,%zu,%lf%c", &c.d, &c.k, &c.r, &extra) != 3)
      throw InvalidArgument("grid entries must look like d,k,r: " + item);
    out.push_back(c);
  }
  if (out.empty()) throw InvalidArgument("sweep grid is empty");
  return out;
}

SweepResult robustness_sweep(const embed::EmbeddingMatrix& embeddings, const corpus::RegimeAssignment& assignment,
                             std::span<const SweepConfig> grid, const SweepOptions& options) {
  if (grid.empty()) throw InvalidArgument("sweep grid is empty");
  embed::check_alignment(embeddings, assignment.ids());
  SweepResult result;
  result.seed = options.seed;
  result.permutations = options.permutations;
  result.entries.resize(grid.size());
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& e = result.entries[i];
    e.config = grid[i];
    try {
      auto params = options.base;
      params.n_components = e.config.d;
      params.n_neighbors = e.config.k;
      const auto topics = project_and_cluster(embeddings, params, e.config.r, options.seed);
      e.communities = topics.partition.count;
      const auto f = field::build_field(topics.partition, assignment, topics.coords, options.tau);
      e.hotl = field_stats(f);
      const auto perm = permutation_test(topics.coords, topics.partition, assignment, options.tau,
                                         options.permutations, derive_seed(options.seed, 20), false);
      e.random_m = perm.random_m;
      e.random_s = perm.random_s;
      e.p_value = perm.p_value;
      e.ok = true;
    } catch (const std::exception& ex) {
      e.ok = false;
      e.error = ex.what();
    }
  }
  return result;
}

nlohmann::json to_json(const SweepResult& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    nlohmann::json j{{"d", e.config.d}, {"k", e.config.k}, {"r", e.config.r}, {"ok", e.ok}};
    if (e.ok) {
      j["communities"] = e.communities;
      j["hotl"] = to_json(e.hotl);
      j["random_m"] = summary_json(e.random_m);
      j["random_s"] = optional_summary_json(e.random_s);
      j["p_value"] = e.p_value;
    } else {
      j["error"] = e.error;
    }
    entries.push_back(std::move(j));
  }
  return {{"seed", r.seed}, {"N", r.permutations}, {"configurations", std::move(entries)}};
}

namespace {

constexpr const char* kHeader = "%-22s %-7s %9s %9s %9s %9s %9s %9s\n";
constexpr const char* kFailed = "FAILED";

std::string cells(const Summary& m, const std::optional<Summary>& s) {
  char buf[128];
  std::snprintf(buf, sizeof buf, " %9.4f %9.4f %9.4f", m.min, m.mean, m.max);
  std::string out = buf;
  if (s) {
    std::snprintf(buf, sizeof buf, " %9.4f %9.4f %9.4f", s->min, s->mean, s->max);
    out += buf;
  } else {
    std::snprintf(buf, sizeof buf, " %9s %9s %9s", "-", "-", "-");
    out += buf;
  }
  return out;
}

std::string row_prefix(const std::string& label, const char* regime) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-22s %-7s", label.c_str(), regime);
  return buf;
}

}  // namespace

std::string render_table(const SweepResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, kHeader, "configuration", "regime", "m_min", "m_mean", "m_max", "s_min", "s_mean",
                "s_max");
  std::string out = buf;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    const auto& e = r.entries[i];
    out += "\n";
    const auto label = e.config.label();
    if (!e.ok) {
      out += row_prefix(label, kFailed) + " " + e.error + "\n";
      continue;
    }
    out += row_prefix(label, "HoTL") + cells(e.hotl.magnitude, e.hotl.cosine) + "\n";
    out += row_prefix(label, "Random") + cells(e.random_m, e.random_s) + "\n";
  }
  return out;
}

namespace {

std::optional<Summary> parse_cells(const std::vector<std::string>& tok, std::size_t at, bool& present) {
  if (tok.size() < at + 3) throw FormatError("table row is missing cells");
  if (tok[at] == "-") {
    present = false;
    return std::nullopt;
  }
  present = true;
  return Summary{std::stod(tok[at]), std::stod(tok[at + 1]), std::stod(tok[at + 2])};
}

SweepConfig parse_label(const std::vector<std::string>& tok) {
  SweepConfig c;
  if (tok.size() < 3 || std::sscanf(tok[0].c_str(), "d=%zu", &c.d) != 1 ||
      std::sscanf(tok[1].c_str(), "k=%zu", &c.k) != 1 || std::sscanf(tok[2].c_str(), "r=%lf", &c.r) != 1)
    throw FormatError("bad configuration label in table");
  return c;
}

}  // namespace

SweepResult parse_table(std::string_view text) {
  SweepResult r;
  std::stringstream ss{std::string(text)};
  std::string line;
  bool header = true;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(' ') == std::string::npos) continue;
    if (header) {
      header = false;
      if (line.rfind("configuration", 0) != 0) throw FormatError("table header missing");
      continue;
    }
    std::vector<std::string> tok;
    std::stringstream ls(line);
    for (std::string t; ls >> t;) tok.push_back(t);
    const auto config = parse_label(tok);
    if (tok.size() < 4) throw FormatError("table row is missing the regime column");
    const auto& regime = tok[3];
    try {
      if (regime == kFailed) {
        SweepEntry e;
        e.config = config;
        const auto pos = line.find(kFailed);
        const auto start = line.find_first_not_of(' ', pos + std::string(kFailed).size());
        e.error = start == std::string::npos ? std::string() : line.substr(start);
        r.entries.push_back(std::move(e));
      } else if (regime == "HoTL") {
        SweepEntry e;
        e.config = config;
        e.ok = true;
        bool present = false;
        e.hotl.magnitude = *parse_cells(tok, 4, present);
        e.hotl.m_bar = e.hotl.magnitude.mean;
        e.hotl.cosine = parse_cells(tok, 7, present);
        if (e.hotl.cosine) e.hotl.s_bar = e.hotl.cosine->mean;
        r.entries.push_back(std::move(e));
      } else if (regime == "Random") {
        if (r.entries.empty() || !(r.entries.back().config == config) || !r.entries.back().ok)
          throw FormatError("Random row without a matching HoTL row");
        bool present = false;
        r.entries.back().random_m = *parse_cells(tok, 4, present);
        r.entries.back().random_s = parse_cells(tok, 7, present);
      } else {
        throw FormatError("unknown regime column: " + regime);
      }
    } catch (const std::invalid_argument&) {
      throw FormatError("non-numeric table cell");
    }
  }
  if (header) throw FormatError("empty table");
  return r;
}

}  // namespace topol::stats
