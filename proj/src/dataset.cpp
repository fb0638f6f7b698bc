#include "dualfact/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dualfact/text.hpp"
#include "json.hpp"

namespace dualfact {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const std::set<std::string> kPronouns = {"it",   "them",  "there", "this", "that",
                                         "these", "those", "they",  "its",  "their",
                                         "here", "a",     "an",    "the"};

std::string require_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw FormatError(std::string("missing or non-string field \"") + key + "\"");
  return it->get<std::string>();
}

std::int64_t require_millis(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw FormatError(std::string("missing or non-numeric field \"") + key + "\"");
  double s = it->get<double>();
  if (!std::isfinite(s) || s < 0) throw FormatError(std::string(key) + " must be >= 0");
  return std::llround(s * 1000.0);
}

std::vector<Fact> read_facts(const json& arr, Layer layer, const char* which) {
  if (!arr.is_array())
    throw FormatError(std::string("facts.") + std::string(to_string(layer)) + "." + which +
                      " must be an array");
  std::vector<Fact> out;
  for (const auto& item : arr) {
    if (!item.is_string()) throw FormatError("fact entries must be strings");
    Fact f = parse_fact(item.get<std::string>(), layer);
    if (contains(out, f))
      throw FormatError("duplicate fact \"" + item.get<std::string>() + "\"");
    out.push_back(std::move(f));
  }
  return out;
}

FactBundle read_bundle(const json& facts, Layer layer, const std::string& clause_id) {
  FactBundle b;
  b.clause_id = clause_id;
  b.layer = layer;
  auto it = facts.find(std::string(to_string(layer)));
  if (it == facts.end()) return b;
  if (!it->is_object()) throw FormatError("facts." + std::string(to_string(layer)) + " must be an object");
  if (auto p = it->find("positive"); p != it->end()) b.positive = read_facts(*p, layer, "positive");
  if (auto n = it->find("negative"); n != it->end()) b.negative = read_facts(*n, layer, "negative");
  if (auto p = it->find("predicted"); p != it->end()) b.predicted = read_facts(*p, layer, "predicted");
  return b;
}

ClauseRecord parse_record(const std::string& line) {
  json obj = json::parse(line);
  if (!obj.is_object()) throw FormatError("record is not an object");
  if (require_string(obj, "schema") != kClauseSchema)
    throw FormatError("unsupported schema \"" + require_string(obj, "schema") + "\"");

  ClauseRecord r;
  r.dataset = require_string(obj, "dataset");
  r.split = parse_split(require_string(obj, "split"));
  r.video_id = require_string(obj, "video_id");
  r.clause_id = require_string(obj, "clause_id");
  if (r.clause_id.empty()) throw FormatError("empty clause_id");
  r.start_ms = require_millis(obj, "start_s");
  r.end_ms = require_millis(obj, "end_s");
  if (r.end_ms <= r.start_ms) throw FormatError("end_s must be greater than start_s");
  r.caption = require_string(obj, "caption");
  r.via_caption = require_string(obj, "via_caption");

  if (auto it = obj.find("via_roles"); it != obj.end()) {
    if (!it->is_array()) throw FormatError("via_roles must be an array");
    for (const auto& v : *it) {
      auto role = v.is_string() ? role_from_label(v.get<std::string>()) : std::nullopt;
      if (!role || *role == ConceptualRole::Action)
        throw FormatError("via_roles entry " + v.dump() + " is not Ingredient/Object, Tool or Location");
      if (std::find(r.via_roles.begin(), r.via_roles.end(), *role) != r.via_roles.end())
        throw FormatError("duplicate via_roles entry " + v.dump());
      r.via_roles.push_back(*role);
    }
  }

  json facts = json::object();
  if (auto it = obj.find("facts"); it != obj.end()) {
    if (!it->is_object()) throw FormatError("facts must be an object");
    facts = *it;
  }
  r.conceptual = read_bundle(facts, Layer::Conceptual, r.clause_id);
  r.contextual = read_bundle(facts, Layer::Contextual, r.clause_id);
  return r;
}

ordered_json facts_json(const FactBundle& b) {
  auto strings = [](const std::vector<Fact>& facts) {
    ordered_json arr = ordered_json::array();
    for (const auto& f : facts) arr.push_back(render(f));
    return arr;
  };
  ordered_json out;
  out["positive"] = strings(b.positive);
  out["negative"] = strings(b.negative);
  if (b.predicted) out["predicted"] = strings(*b.predicted);
  return out;
}

// Whether the word sequence of `needle` occurs contiguously in `hay`.
bool contains_phrase(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

void add(ValidationReport& report, const ClauseRecord& r, std::string rule, std::string message,
         Severity severity = Severity::Error) {
  report.entries.push_back({r.clause_id, std::move(rule), severity, std::move(message)});
}

void validate_via(const ClauseRecord& r, ValidationReport& report) {
  auto gold = text::word_tokens(r.caption);
  auto via = text::word_tokens(r.via_caption);
  if (gold.empty()) {
    add(report, r, "caption-empty", "gold caption has no words");
    return;
  }
  // Captions are imperative, so the main verb leads the clause.
  if (std::find(via.begin(), via.end(), gold.front()) == via.end())
    add(report, r, "via-main-verb", "VIA caption lacks main verb \"" + gold.front() + "\"");

  std::vector<std::string> missing;
  // The main verb has its own rule above.
  for (const auto& t : std::vector<std::string>(gold.begin() + 1, gold.end()))
    if (!kPronouns.count(t) && std::find(via.begin(), via.end(), t) == via.end()) missing.push_back(t);
  if (!missing.empty())
    add(report, r, "via-superset", "VIA caption drops gold token(s): " + text::join(missing, " "));

  for (auto role : r.via_roles) {
    bool supported = false;
    for (const auto& f : r.conceptual.positive) {
      const auto& c = std::get<ConceptualFact>(f);
      if (c.role() != role) continue;
      auto value = text::word_tokens(c.value());
      if (contains_phrase(via, value) && !contains_phrase(gold, value)) supported = true;
    }
    if (!supported)
      add(report, r, "via-role-unsupported",
          "VIA role " + std::string(canonical_label(role)) +
              " has no positive value that appears only in the VIA caption");
  }
}

void validate_negatives(const ClauseRecord& r, const FactBundle& b, ValidationReport& report) {
  std::set<std::string> positive_slots;
  for (const auto& p : b.positive) positive_slots.insert(slot_of(p));
  for (const auto& n : b.negative) {
    std::string shown = render(n);
    if (contains(b.positive, n)) {
      add(report, r, "neg-equals-positive", "negative \"" + shown + "\" is also a positive");
      continue;
    }
    if (!positive_slots.count(slot_of(n)))
      add(report, r, "neg-structure",
          "negative \"" + shown + "\" has slot " + slot_of(n) + " absent from the positives");
    for (const auto& p : b.positive) {
      if (text::shares_lexical_material(entity_of(n), entity_of(p))) {
        add(report, r, "neg-token-reuse",
            "negative \"" + shown + "\" reuses material of positive \"" + render(p) + "\"");
        break;
      }
    }
  }
}

}  // namespace

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split \"" + std::string(s) + "\"");
}

const ClauseRecord* Dataset::find(std::string_view clause_id) const {
  for (const auto& c : clauses)
    if (c.clause_id == clause_id) return &c;
  return nullptr;
}

std::vector<std::string> Dataset::videos() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& c : clauses)
    if (seen.insert(c.video_id).second) out.push_back(c.video_id);
  return out;
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    ClauseRecord r;
    try {
      r = parse_record(line);
    } catch (const json::exception& e) {
      throw LoadError(lineno, std::string("malformed JSON: ") + e.what());
    } catch (const FormatError& e) {
      throw LoadError(lineno, e.what());
    }
    if (!ids.insert(r.clause_id).second)
      throw LoadError(lineno, "duplicate clause_id \"" + r.clause_id + "\"");
    ds.clauses.push_back(std::move(r));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset " + path.string());
  return read_dataset(in);
}

std::string serialize_record(const ClauseRecord& r) {
  ordered_json obj;
  obj["schema"] = kClauseSchema;
  obj["dataset"] = r.dataset;
  obj["split"] = to_string(r.split);
  obj["video_id"] = r.video_id;
  obj["clause_id"] = r.clause_id;
  obj["start_s"] = static_cast<double>(r.start_ms) / 1000.0;
  obj["end_s"] = static_cast<double>(r.end_ms) / 1000.0;
  obj["caption"] = r.caption;
  obj["via_caption"] = r.via_caption;
  ordered_json roles = ordered_json::array();
  for (auto role : r.via_roles) roles.push_back(canonical_label(role));
  obj["via_roles"] = roles;
  obj["facts"]["conceptual"] = facts_json(r.conceptual);
  obj["facts"]["contextual"] = facts_json(r.contextual);
  return obj.dump();
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  for (const auto& r : dataset.clauses) out << serialize_record(r) << '\n';
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_dataset(dataset, out);
}

std::size_t ValidationReport::error_count() const {
  return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const auto& e) {
    return e.severity == Severity::Error;
  }));
}

std::size_t ValidationReport::warning_count() const { return entries.size() - error_count(); }

ValidationReport validate(const Dataset& dataset) {
  ValidationReport report;
  std::set<std::string> seen;
  for (const auto& r : dataset.clauses) {
    // Loading already rejects these; datasets built in memory may not have been loaded.
    if (!seen.insert(r.clause_id).second) add(report, r, "clause-id-unique", "duplicate clause_id");
    if (r.end_ms <= r.start_ms) add(report, r, "time-order", "end_s must exceed start_s");

    validate_via(r, report);
    for (auto layer : kLayers) {
      const auto& b = r.bundle(layer);
      if (b.positive.empty())
        add(report, r, "no-positive-facts",
            "no positive " + std::string(to_string(layer)) + " facts", Severity::Warning);
      validate_negatives(r, b, report);
    }
  }
  std::stable_sort(report.entries.begin(), report.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.clause_id, a.rule_id) < std::tie(b.clause_id, b.rule_id);
  });
  return report;
}

SplitStats& SplitStats::operator+=(const SplitStats& o) {
  videos += o.videos;
  clips += o.clips;
  via += o.via;
  conceptual += o.conceptual;
  contextual += o.contextual;
  return *this;
}

DatasetStats& DatasetStats::operator+=(const DatasetStats& o) {
  for (const auto& [split, s] : o.splits) splits[split] += s;
  return *this;
}

DatasetStats stats(const Dataset& dataset) {
  DatasetStats out;
  out.splits[Split::Train];
  out.splits[Split::Test];
  std::map<Split, std::set<std::string>> videos;
  for (const auto& r : dataset.clauses) {
    auto& s = out.splits[r.split];
    videos[r.split].insert(r.video_id);
    s.clips += 1;
    s.via += static_cast<std::int64_t>(r.via_roles.size());
    s.conceptual += static_cast<std::int64_t>(r.conceptual.positive.size());
    s.contextual += static_cast<std::int64_t>(r.contextual.positive.size());
  }
  for (const auto& [split, ids] : videos) out.splits[split].videos = static_cast<std::int64_t>(ids.size());
  return out;
}

}  // namespace dualfact
