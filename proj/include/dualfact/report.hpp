#pragma once

// Report tables and their csv / json records / plain text renderings.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dualfact {

inline constexpr std::string_view kToolVersion = "0.1.0";

// A count stays an integer in records output; everything else is text,
// already formatted the way it appears in the text tables.
using Cell = std::variant<std::int64_t, std::string>;

std::string cell_text(const Cell& c);

struct Table {
  std::string id;     // file stem, e.g. "verification_conceptual_textual"
  std::string title;  // caption line in the text report
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);  // throws PreconditionError on width mismatch
};

struct Report {
  // Insertion-ordered key/value metadata.
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<Table> tables;
  std::map<std::string, std::int64_t> exclusions;  // stage -> excluded items
  std::vector<std::string> notices;                // per-clause errors and skipped steps
  bool structural_error = false;

  const Table* find(const std::string& id) const;
  void set_meta(const std::string& key, const std::string& value);
  // 0 clean, 1 structural error, 2 partial (exclusions or notices present).
  int exit_code() const;
};

enum class ReportFormat { Csv, Records, Text };
ReportFormat parse_report_format(std::string_view s);  // "csv" | "records" | "text"

std::string render_text(const Report& report);
std::string render_records(const Report& report);  // JSON
std::string render_csv(const Table& table);

// Writes report.txt, report.json and/or one <id>.csv per table; returns the
// written paths in order. Throws PreconditionError when the directory cannot
// be written.
std::vector<std::filesystem::path> emit_tables(const Report& report, const std::filesystem::path& dir,
                                               const std::vector<ReportFormat>& formats = {
                                                   ReportFormat::Csv, ReportFormat::Records, ReportFormat::Text});

}  // namespace dualfact
