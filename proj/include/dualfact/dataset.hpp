#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dualfact/fact.hpp"

namespace dualfact {

inline constexpr std::string_view kClauseSchema = "dualfact.clause/v1";

enum class Split { Train, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view s);

// One atomic instructional step aligned to a video segment.
struct ClauseRecord {
  std::string dataset;
  Split split = Split::Test;
  std::string video_id;
  std::string clause_id;
  std::int64_t start_ms = 0;  // millisecond precision, stored as seconds on disk
  std::int64_t end_ms = 0;
  std::string caption;
  std::string via_caption;
  std::vector<ConceptualRole> via_roles;  // never Action
  FactBundle conceptual;
  FactBundle contextual;

  const FactBundle& bundle(Layer layer) const {
    return layer == Layer::Conceptual ? conceptual : contextual;
  }
  FactBundle& bundle(Layer layer) { return layer == Layer::Conceptual ? conceptual : contextual; }
};

struct Dataset {
  std::vector<ClauseRecord> clauses;

  const ClauseRecord* find(std::string_view clause_id) const;
  // Distinct video ids in first-appearance order.
  std::vector<std::string> videos() const;
};

// A malformed record; line numbers are 1-based.
class LoadError : public FormatError {
 public:
  LoadError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Dataset load_dataset(const std::filesystem::path& path);
Dataset read_dataset(std::istream& in);

std::string serialize_record(const ClauseRecord& record);
void write_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

enum class Severity { Error, Warning };

struct ValidationEntry {
  std::string clause_id;
  std::string rule_id;
  Severity severity = Severity::Error;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationEntry> entries;  // sorted by (clause_id, rule_id)

  std::size_t error_count() const;
  std::size_t warning_count() const;
};

// Machine-checkable subset of the annotation guidelines. Never throws on data
// problems; each one becomes a report entry.
ValidationReport validate(const Dataset& dataset);

struct SplitStats {
  std::int64_t videos = 0;
  std::int64_t clips = 0;
  std::int64_t via = 0;  // (clause, added role) pairs
  std::int64_t conceptual = 0;
  std::int64_t contextual = 0;

  SplitStats& operator+=(const SplitStats& o);
  friend bool operator==(const SplitStats&, const SplitStats&) = default;
};

struct DatasetStats {
  std::map<Split, SplitStats> splits;  // both splits always present

  // Adds per-split tallies; valid for shards with disjoint videos.
  DatasetStats& operator+=(const DatasetStats& o);
  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

DatasetStats stats(const Dataset& dataset);

}  // namespace dualfact
