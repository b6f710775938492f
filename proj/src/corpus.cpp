#include "topol/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include <json.hpp>

#include "topol/checksum.hpp"
#include "topol/rng.hpp"

namespace topol::corpus {
namespace {

using nlohmann::json;

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

template <class Int>
bool parse_digits(std::string_view s, Int& out) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DD, optionally followed by 'T' or ' ' and a time component.
  if (text.size() < 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  if (text.size() > 10 && text[10] != 'T' && text[10] != ' ') return std::nullopt;
  int y = 0;
  unsigned m = 0, d = 0;
  if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), m) ||
      !parse_digits(text.substr(8, 2), d))
    return std::nullopt;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  if (text.size() > 10) {
    auto rest = text.substr(11);
    // HH:MM[:SS[.frac]][Z|+hh:mm]; validated loosely, since only the day is kept.
    unsigned hh = 0, mm = 0;
    if (rest.size() < 5 || rest[2] != ':' || !parse_digits(rest.substr(0, 2), hh) ||
        !parse_digits(rest.substr(3, 2), mm) || hh > 23 || mm > 59)
      return std::nullopt;
  }
  return Timestamp{std::chrono::sys_days{ymd}};
}

std::string format_date(const Timestamp& ts) {
  std::chrono::year_month_day ymd{ts.day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string to_string(const AttributeValue& value) {
  struct Visitor {
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(double v) const {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, ptr);
    }
    std::string operator()(const Timestamp& t) const { return format_date(t); }
  };
  return std::visit(Visitor{}, value);
}

AttributeValue infer_attribute(std::string_view raw) {
  if (auto n = parse_number(raw)) return *n;
  if (auto t = parse_iso8601(raw)) return *t;
  return std::string(raw);
}

Corpus::Corpus(std::vector<Document> documents) : docs_(std::move(documents)) {
  if (docs_.size() < 2) throw InvalidArgument("corpus needs at least 2 documents");
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    if (d.id.empty()) throw InvalidArgument("document " + std::to_string(i + 1) + " has an empty id");
    if (is_blank(d.text)) throw InvalidArgument("document '" + d.id + "' has blank text");
    if (!index_.emplace(d.id, i).second) throw InvalidArgument("duplicate document id '" + d.id + "'");
  }
}

std::vector<std::string> Corpus::ids() const {
  std::vector<std::string> out;
  out.reserve(docs_.size());
  for (const auto& d : docs_) out.push_back(d.id);
  return out;
}

std::vector<std::string> Corpus::texts() const {
  std::vector<std::string> out;
  out.reserve(docs_.size());
  for (const auto& d : docs_) out.push_back(d.text);
  return out;
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Format parse_format(std::string_view name) {
  if (name == "jsonl") return Format::jsonl;
  if (name == "csv") return Format::csv;
  throw InvalidArgument("unknown corpus format '" + std::string(name) + "' (expected jsonl or csv)");
}

Corpus parse_jsonl(std::string_view content) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (const auto& line : split(content, '\n')) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto where = "line " + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ": invalid JSON: " + e.what());
    }
    if (!record.is_object()) throw FormatError(where + ": record is not a JSON object");
    for (const char* key : {"id", "text"}) {
      if (!record.contains(key)) throw FormatError(where + ": missing required field \"" + key + "\"");
      if (!record[key].is_string()) throw FormatError(where + ": field \"" + key + "\" must be a string");
    }
    Document doc{record["id"].get<std::string>(), record["text"].get<std::string>(), {}};
    if (is_blank(doc.text)) throw FormatError(where + ": field \"text\" is blank");
    if (!seen.insert(doc.id).second) throw FormatError(where + ": duplicate id '" + doc.id + "'");
    for (auto& [key, value] : record.items()) {
      if (key == "id" || key == "text") continue;
      if (value.is_number()) {
        doc.attributes[key] = value.get<double>();
      } else if (value.is_string()) {
        auto s = value.get<std::string>();
        if (auto t = parse_iso8601(s)) doc.attributes[key] = *t;
        else doc.attributes[key] = std::move(s);
      } else if (value.is_boolean()) {
        doc.attributes[key] = std::string(value.get<bool>() ? "true" : "false");
      } else if (value.is_null()) {
        continue;
      } else {
        throw FormatError(where + ": attribute \"" + key + "\" is not a scalar");
      }
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view content) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !record.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        field.clear();
        record.clear();
        field_started = false;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw FormatError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Corpus parse_csv(std::string_view content) {
  auto records = parse_csv_records(content);
  if (records.empty()) throw FormatError("CSV corpus has no header row");
  const auto& header = records.front();
  auto col = [&](const char* name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError(std::string("CSV header lacks required column \"") + name + "\"");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto id_col = col("id"), text_col = col("text");
  std::vector<Document> docs;
  std::set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const auto where = "record " + std::to_string(r);
    if (rec.size() != header.size())
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(rec.size()));
    Document doc{rec[id_col], rec[text_col], {}};
    if (doc.id.empty()) throw FormatError(where + ": missing required field \"id\"");
    if (is_blank(doc.text)) throw FormatError(where + ": missing required field \"text\"");
    if (!seen.insert(doc.id).second) throw FormatError(where + ": duplicate id '" + doc.id + "'");
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == id_col || c == text_col || rec[c].empty()) continue;
      doc.attributes[header[c]] = infer_attribute(rec[c]);
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs));
}

Corpus load_corpus(const std::filesystem::path& path, Format format) {
  if (!std::filesystem::exists(path)) throw InvalidArgument("corpus file not found: " + path.string());
  auto content = read_file(path);
  return format == Format::jsonl ? parse_jsonl(content) : parse_csv(content);
}

char regime_char(Regime r) noexcept { return r == Regime::A ? 'A' : 'B'; }

Regime parse_regime(std::string_view text) {
  text = trim(text);
  if (text == "A" || text == "a") return Regime::A;
  if (text == "B" || text == "b") return Regime::B;
  throw InvalidArgument("regime must be A or B, got '" + std::string(text) + "'");
}

BoundarySpec parse_boundary(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw InvalidArgument("boundary spec needs a kind prefix: " + std::string(text));
  auto kind = text.substr(0, colon);
  auto rest = text.substr(colon + 1);
  if (kind == "list") {
    ByList spec;
    auto a = assignment_from_csv(read_file(std::filesystem::path(std::string(rest))));
    for (std::size_t i = 0; i < a.size(); ++i) spec.regime_of_id[a.ids()[i]] = a[i];
    return spec;
  }
  auto colon2 = rest.find(':');
  if (colon2 == std::string_view::npos) throw InvalidArgument("boundary spec needs <attribute>:<rule>");
  std::string attribute(rest.substr(0, colon2));
  auto rule = rest.substr(colon2 + 1);
  if (kind == "threshold") {
    auto cut = infer_attribute(rule);
    if (std::holds_alternative<std::string>(cut))
      throw InvalidArgument("threshold cut must be a number or ISO-8601 date: " + std::string(rule));
    return ByThreshold{attribute, cut};
  }
  if (kind == "label") {
    ByLabel spec{attribute, {}};
    for (const auto& item : split(rule, ',')) {
      auto eq = item.rfind('=');
      if (eq == std::string::npos) throw InvalidArgument("label rule item needs value=A|B: " + item);
      spec.regime_of_value[to_string(infer_attribute(trim(std::string_view(item).substr(0, eq))))] =
          parse_regime(std::string_view(item).substr(eq + 1));
    }
    return spec;
  }
  throw InvalidArgument("unknown boundary kind '" + std::string(kind) + "'");
}

std::string describe(const BoundarySpec& spec) {
  struct Visitor {
    std::string operator()(const ByLabel& s) const {
      std::string out = "label:" + s.attribute + ":";
      bool first = true;
      for (const auto& [v, r] : s.regime_of_value) {
        if (!first) out += ',';
        first = false;
        out += v + '=' + regime_char(r);
      }
      return out;
    }
    std::string operator()(const ByThreshold& s) const {
      return "threshold:" + s.attribute + ":" + to_string(s.cut);
    }
    std::string operator()(const ByList& s) const {
      std::string body;
      for (const auto& [id, r] : s.regime_of_id) body += id + '=' + regime_char(r) + ';';
      return "list:" + std::to_string(s.regime_of_id.size()) + " ids sha256=" + sha256_hex(body).substr(0, 16);
    }
  };
  return std::visit(Visitor{}, spec);
}

RegimeAssignment::RegimeAssignment(std::vector<std::string> ids, std::vector<Regime> regimes)
    : ids_(std::move(ids)), regimes_(std::move(regimes)) {
  if (ids_.size() != regimes_.size()) throw InvalidArgument("assignment ids and regimes differ in length");
  n_a_ = static_cast<std::size_t>(std::count(regimes_.begin(), regimes_.end(), Regime::A));
  n_b_ = regimes_.size() - n_a_;
  if (n_a_ == 0) throw InvalidArgument("regime A is empty");
  if (n_b_ == 0) throw InvalidArgument("regime B is empty");
}

std::optional<Regime> RegimeAssignment::regime_of(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return regimes_[i];
  return std::nullopt;
}

RegimeAssignment RegimeAssignment::swapped() const {
  auto r = regimes_;
  for (auto& x : r) x = x == Regime::A ? Regime::B : Regime::A;
  return RegimeAssignment(ids_, std::move(r));
}

namespace {

const AttributeValue& require_attribute(const Document& d, const std::string& attribute) {
  auto it = d.attributes.find(attribute);
  if (it == d.attributes.end())
    throw InvalidArgument("document '" + d.id + "' lacks boundary attribute '" + attribute + "'");
  return it->second;
}

Regime classify(const Document& d, const ByLabel& s) {
  auto key = to_string(require_attribute(d, s.attribute));
  auto it = s.regime_of_value.find(key);
  if (it == s.regime_of_value.end())
    throw InvalidArgument("document '" + d.id + "' has unmapped " + s.attribute + " value '" + key + "'");
  return it->second;
}

Regime classify(const Document& d, const ByThreshold& s) {
  const auto& value = require_attribute(d, s.attribute);
  if (value.index() != s.cut.index() || std::holds_alternative<std::string>(value))
    throw InvalidArgument("document '" + d.id + "' attribute '" + s.attribute +
                          "' is not comparable with the threshold cut");
  bool below = std::holds_alternative<double>(value)
                   ? std::get<double>(value) < std::get<double>(s.cut)
                   : std::get<Timestamp>(value) < std::get<Timestamp>(s.cut);
  return below ? Regime::A : Regime::B;
}

Regime classify(const Document& d, const ByList& s) {
  auto it = s.regime_of_id.find(d.id);
  if (it == s.regime_of_id.end()) throw InvalidArgument("document '" + d.id + "' is not in the boundary list");
  return it->second;
}

}  // namespace

RegimeAssignment apply_boundary(const Corpus& corpus, const BoundarySpec& spec) {
  std::vector<Regime> regimes;
  regimes.reserve(corpus.size());
  for (const auto& d : corpus.documents())
    regimes.push_back(std::visit([&](const auto& s) { return classify(d, s); }, spec));
  return RegimeAssignment(corpus.ids(), std::move(regimes));
}

void shuffle_labels(std::vector<Regime>& labels, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = labels.size(); i > 1; --i) {
    auto j = uniform_below(rng, i);
    std::swap(labels[i - 1], labels[j]);
  }
}

RegimeAssignment permute_assignment(const RegimeAssignment& assignment, std::uint64_t seed) {
  auto labels = assignment.regimes();
  shuffle_labels(labels, seed);
  return RegimeAssignment(assignment.ids(), std::move(labels));
}

std::string assignment_to_csv(const RegimeAssignment& assignment) {
  std::string out = "id,regime\n";
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    out += csv_escape(assignment.ids()[i]);
    out += ',';
    out += regime_char(assignment[i]);
    out += '\n';
  }
  return out;
}

RegimeAssignment assignment_from_csv(std::string_view content) {
  auto records = parse_csv_records(content);
  if (records.empty() || records.front().size() < 2 || records.front()[0] != "id" || records.front()[1] != "regime")
    throw FormatError("assignment CSV must have header id,regime");
  std::vector<std::string> ids;
  std::vector<Regime> regimes;
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() < 2) throw FormatError("assignment record " + std::to_string(r) + " is short");
    ids.push_back(records[r][0]);
    regimes.push_back(parse_regime(records[r][1]));
  }
  return RegimeAssignment(std::move(ids), std::move(regimes));
}

}  // namespace topol::corpus
