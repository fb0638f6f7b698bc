#include "dualfact/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dualfact/error.hpp"
#include "json.hpp"

namespace dualfact {

using nlohmann::ordered_json;

std::string cell_text(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

void Table::add(std::vector<Cell> row) {
  if (row.size() != columns.size())
    throw PreconditionError("table " + id + ": row has " + std::to_string(row.size()) + " cells, expected " +
                            std::to_string(columns.size()));
  rows.push_back(std::move(row));
}

const Table* Report::find(const std::string& id) const {
  for (const auto& t : tables)
    if (t.id == id) return &t;
  return nullptr;
}

void Report::set_meta(const std::string& key, const std::string& value) {
  for (auto& [k, v] : metadata)
    if (k == key) {
      v = value;
      return;
    }
  metadata.emplace_back(key, value);
}

int Report::exit_code() const {
  if (structural_error) return 1;
  if (!notices.empty()) return 2;
  for (const auto& [stage, n] : exclusions)
    if (n > 0) return 2;
  return 0;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "records" || s == "json") return ReportFormat::Records;
  if (s == "text") return ReportFormat::Text;
  throw FormatError("unknown report format '" + std::string(s) + "'");
}

std::string render_text(const Report& report) {
  std::ostringstream out;
  out << "dualfact report\n";
  for (const auto& [k, v] : report.metadata) out << k << ": " << v << "\n";
  for (const auto& t : report.tables) {
    out << "\n" << t.title << "\n";
    std::vector<std::size_t> width(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      width[c] = t.columns[c].size();
      for (const auto& r : t.rows) width[c] = std::max(width[c], cell_text(r[c]).size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (c) out << "  ";
        // First column left-aligned, numbers right-aligned.
        if (c == 0) out << cells[c] << std::string(width[c] - cells[c].size(), ' ');
        else out << std::string(width[c] - cells[c].size(), ' ') << cells[c];
      }
      out << "\n";
    };
    line(t.columns);
    std::size_t total = 0;
    for (auto w : width) total += w;
    out << std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') << "\n";
    for (const auto& r : t.rows) {
      std::vector<std::string> cells;
      for (const auto& c : r) cells.push_back(cell_text(c));
      line(cells);
    }
  }
  if (!report.exclusions.empty()) {
    out << "\nexclusions\n";
    for (const auto& [stage, n] : report.exclusions) out << "  " << stage << ": " << n << "\n";
  }
  if (!report.notices.empty()) {
    out << "\nnotices\n";
    for (const auto& n : report.notices) out << "  " << n << "\n";
  }
  return out.str();
}

std::string render_records(const Report& report) {
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : report.metadata) meta[k] = v;
  ordered_json tables = ordered_json::array();
  for (const auto& t : report.tables) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
      ordered_json row = ordered_json::object();
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (const auto* i = std::get_if<std::int64_t>(&r[c])) row[t.columns[c]] = *i;
        else row[t.columns[c]] = std::get<std::string>(r[c]);
      }
      rows.push_back(row);
    }
    tables.push_back({{"id", t.id}, {"title", t.title}, {"columns", t.columns}, {"rows", rows}});
  }
  ordered_json excl = ordered_json::object();
  for (const auto& [k, v] : report.exclusions) excl[k] = v;
  ordered_json doc = {{"metadata", meta}, {"tables", tables}, {"exclusions", excl},
                      {"notices", report.notices}, {"exit_code", report.exit_code()}};
  return doc.dump(2) + "\n";
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PreconditionError("cannot write " + path.string());
  out << content;
  if (!out) throw PreconditionError("write failed for " + path.string());
}

}  // namespace

std::string render_csv(const Table& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + csv_field(t.columns[c]);
  out += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + csv_field(cell_text(r[c]));
    out += "\n";
  }
  return out;
}

std::vector<std::filesystem::path> emit_tables(const Report& report, const std::filesystem::path& dir,
                                               const std::vector<ReportFormat>& formats) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw PreconditionError("cannot create output dir " + dir.string());
  std::vector<std::filesystem::path> written;
  auto want = [&](ReportFormat f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  if (want(ReportFormat::Records)) {
    written.push_back(dir / "report.json");
    write_file(written.back(), render_records(report));
  }
  if (want(ReportFormat::Text)) {
    written.push_back(dir / "report.txt");
    write_file(written.back(), render_text(report));
  }
  if (want(ReportFormat::Csv)) {
    for (const auto& t : report.tables) {
      written.push_back(dir / (t.id + ".csv"));
      write_file(written.back(), render_csv(t));
    }
  }
  return written;
}

}  // namespace dualfact
