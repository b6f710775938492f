#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "topol/matrix.hpp"

namespace topol::corpus {

/// Calendar day parsed from an ISO-8601 date or date-time. Time of day is dropped.
struct Timestamp {
  std::chrono::sys_days day;
  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

std::optional<Timestamp> parse_iso8601(std::string_view text);
std::string format_date(const Timestamp& ts);

using AttributeValue = std::variant<std::string, double, Timestamp>;

/// Canonical text form: shortest round-trip number, YYYY-MM-DD for dates.
std::string to_string(const AttributeValue& value);

/// Infers the type of a raw field: number, then ISO-8601 date, else string.
AttributeValue infer_attribute(std::string_view raw);

struct Document {
  std::string id;
  std::string text;
  std::map<std::string, AttributeValue> attributes;
};

class Corpus {
 public:
  /// Validates unique ids, non-blank text and n >= 2.
  explicit Corpus(std::vector<Document> documents);

  std::size_t size() const noexcept { return docs_.size(); }
  const std::vector<Document>& documents() const noexcept { return docs_; }
  const Document& operator[](std::size_t i) const noexcept { return docs_[i]; }
  std::vector<std::string> ids() const;
  std::vector<std::string> texts() const;
  std::optional<std::size_t> index_of(std::string_view id) const;

 private:
  std::vector<Document> docs_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

enum class Format { jsonl, csv };

Format parse_format(std::string_view name);
Corpus load_corpus(const std::filesystem::path& path, Format format);
Corpus parse_jsonl(std::string_view content);
Corpus parse_csv(std::string_view content);

/// RFC 4180 style CSV records (quoted fields, doubled quotes, CRLF tolerant).
std::vector<std::vector<std::string>> parse_csv_records(std::string_view content);
std::string csv_escape(std::string_view field);

enum class Regime : std::uint8_t { A = 0, B = 1 };

char regime_char(Regime r) noexcept;
Regime parse_regime(std::string_view text);

struct ByLabel {
  std::string attribute;
  std::map<std::string, Regime> regime_of_value;
};

/// attribute < cut maps to regime A, everything else to B.
struct ByThreshold {
  std::string attribute;
  AttributeValue cut;
};

struct ByList {
  std::map<std::string, Regime> regime_of_id;
};

using BoundarySpec = std::variant<ByLabel, ByThreshold, ByList>;

/// Text form used on the command line and in config files:
///   label:<attr>:<value>=<A|B>,...
///   threshold:<attr>:<cut>
///   list:<csv file with id,regime>
BoundarySpec parse_boundary(std::string_view text);
std::string describe(const BoundarySpec& spec);

class RegimeAssignment {
 public:
  /// Throws if either regime is empty or the vectors disagree in length.
  RegimeAssignment(std::vector<std::string> ids, std::vector<Regime> regimes);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<Regime>& regimes() const noexcept { return regimes_; }
  Regime operator[](std::size_t i) const noexcept { return regimes_[i]; }
  std::size_t n_a() const noexcept { return n_a_; }
  std::size_t n_b() const noexcept { return n_b_; }
  std::optional<Regime> regime_of(std::string_view id) const;

  /// Same ids with A and B exchanged.
  RegimeAssignment swapped() const;

  friend bool operator==(const RegimeAssignment&, const RegimeAssignment&) = default;

 private:
  std::vector<std::string> ids_;
  std::vector<Regime> regimes_;
  std::size_t n_a_ = 0;
  std::size_t n_b_ = 0;
};

RegimeAssignment apply_boundary(const Corpus& corpus, const BoundarySpec& spec);

/// In-place Fisher-Yates shuffle of a label column, driven by `seed`.
void shuffle_labels(std::vector<Regime>& labels, std::uint64_t seed);

/// Uniformly random relabeling (Fisher-Yates over the label column). Counts are preserved.
RegimeAssignment permute_assignment(const RegimeAssignment& assignment, std::uint64_t seed);

std::string assignment_to_csv(const RegimeAssignment& assignment);
RegimeAssignment assignment_from_csv(std::string_view content);

}  // namespace topol::corpus
