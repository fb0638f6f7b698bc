#include "dualfact/extraction.hpp"

#include <fstream>
#include <set>

#include "dualfact/parallel.hpp"
#include "dualfact/text.hpp"
#include "json.hpp"

namespace dualfact {

ExtractionResult extract_facts(const std::string& caption, Layer layer, TextBackend& backend,
                               const PromptTemplate& tmpl, const std::string& clause_id) {
  if (text::trim(caption).empty()) throw PreconditionError("empty caption for " + clause_id);
  if (tmpl.layer != layer)
    throw PreconditionError("template " + tmpl.template_id + " is for the " +
                            std::string(to_string(tmpl.layer)) + " layer");
  TextRequest request{tmpl.template_id, tmpl.render({{"caption", caption}}), clause_id, caption, layer};

  ExtractionResult result;
  result.log.clause_id = clause_id;
  for (int attempt = 1; attempt <= 2; ++attempt) {
    result.log.attempts = attempt;
    std::string raw = backend.complete(request);
    result.log.raw_responses.push_back(raw);
    try {
      auto parsed = parse_fact_list(raw, layer);
      result.facts = std::move(parsed.facts);
      result.log.fragments = std::move(parsed.fragments);
      result.log.duplicates = parsed.duplicates;
      result.log.empty_input = parsed.empty_input;
      return result;
    } catch (const ParseError& e) {
      result.log.error = e.what();
    }
  }
  throw ExtractionError(std::move(result.log));
}

std::size_t ExtractionRun::flagged() const {
  std::size_t n = 0;
  for (const auto& l : logs) n += l.error.has_value();
  return n;
}

ExtractionRun extract_dataset(const Dataset& dataset, Layer layer, TextBackend& backend,
                              const PromptTemplate& tmpl, const ExtractOptions& options) {
  const auto& clauses = dataset.clauses;
  std::vector<std::optional<std::vector<Fact>>> facts(clauses.size());
  std::vector<ExtractionLog> logs(clauses.size());
  parallel_for(clauses.size(), options.workers, [&](std::size_t i) {
    const auto& c = clauses[i];
    const std::string& caption = options.use_via_caption && !c.via_caption.empty() ? c.via_caption : c.caption;
    try {
      auto r = extract_facts(caption, layer, backend, tmpl, c.clause_id);
      facts[i] = std::move(r.facts);
      logs[i] = std::move(r.log);
    } catch (const ExtractionError& e) {
      logs[i] = e.log();
    } catch (const TransportError& e) {
      logs[i].clause_id = c.clause_id;
      logs[i].transport_failure = true;
      logs[i].error = e.what();
    }
  });
  ExtractionRun run;
  for (std::size_t i = 0; i < clauses.size(); ++i)
    if (facts[i]) run.predicted[clauses[i].clause_id] = std::move(*facts[i]);
  run.logs = std::move(logs);
  return run;
}

void attach_predictions(Dataset& dataset, Layer layer,
                        const std::map<std::string, std::vector<Fact>>& predicted) {
  for (auto& c : dataset.clauses) {
    auto it = predicted.find(c.clause_id);
    if (it != predicted.end()) c.bundle(layer).predicted = it->second;
  }
}

SynonymTable load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  // {"canonical": ["variant", ...]}
  SynonymTable table;
  for (const auto& [canonical, variants] : j.items()) {
    auto c = normalize_entity(canonical);
    if (!c) throw FormatError(path.string() + ": empty canonical value");
    for (const auto& v : variants) {
      auto n = normalize_entity(v.get<std::string>());
      if (n) table[*n] = *c;
    }
  }
  return table;
}

namespace {

std::string merged(const std::string& value, const SynonymTable& synonyms) {
  auto it = synonyms.find(value);
  return it == synonyms.end() ? value : it->second;
}

std::string match_key(const Fact& f, const SynonymTable& synonyms) {
  if (const auto* c = std::get_if<ConceptualFact>(&f)) return merged(c->value(), synonyms);
  const auto& x = std::get<ContextualFact>(f);
  return merged(x.predicate(), synonyms) + "|" + merged(x.argument(), synonyms);
}

using SlotSets = std::map<std::string, std::set<std::string>>;

SlotSets by_slot(const std::vector<Fact>& facts, Layer layer, const SynonymTable& synonyms) {
  SlotSets out;
  for (const auto& f : facts) {
    if (layer_of(f) != layer) throw PreconditionError("fact \"" + render(f) + "\" is in the wrong layer");
    out[slot_of(f)].insert(match_key(f, synonyms));
  }
  return out;
}

}  // namespace

SlotMetrics eval_extraction(const std::map<std::string, std::vector<Fact>>& predicted,
                            const std::map<std::string, std::vector<Fact>>& gold, Layer layer,
                            const SynonymTable& synonyms) {
  if (predicted.size() != gold.size())
    throw PreconditionError("predicted and gold cover different clause sets");
  SlotMetrics m;
  for (const auto& [clause, gold_facts] : gold) {
    auto p = predicted.find(clause);
    if (p == predicted.end()) throw PreconditionError("no predicted facts for clause " + clause);
    auto gs = by_slot(gold_facts, layer, synonyms);
    auto ps = by_slot(p->second, layer, synonyms);
    for (const auto& slot : slot_order(layer)) {
      const auto& g = gs[slot];
      const auto& q = ps[slot];
      Tally t;
      for (const auto& v : q) (g.count(v) ? t.tp : t.fp)++;
      for (const auto& v : g) t.fn += q.count(v) == 0;
      m.tallies[slot] += t;
    }
  }
  PRF sum;
  for (const auto& slot : slot_order(layer)) {
    const Tally& t = m.tallies[slot];
    if (t.tp + t.fp + t.fn == 0) {
      m.tallies.erase(slot);
      continue;
    }
    m.slots.push_back(slot);
    m.per_slot[slot] = prf(t);
    m.micro_tally += t;
    sum.precision += m.per_slot[slot].precision;
    sum.recall += m.per_slot[slot].recall;
    sum.f1 += m.per_slot[slot].f1;
  }
  m.micro = prf(m.micro_tally);
  if (!m.slots.empty()) {
    double n = static_cast<double>(m.slots.size());
    m.macro = {sum.precision / n, sum.recall / n, sum.f1 / n};
  } else {
    m.macro = prf(Tally{});
  }
  return m;
}

SensitivityResult sensitivity_analysis(const Dataset& dataset, Layer layer, const ClauseScorer& score) {
  struct Pooled {
    Ratio predicted, gold;
  };
  std::map<std::string, Pooled> videos;
  SensitivityResult out;
  for (const auto& c : dataset.clauses) {
    const auto& b = c.bundle(layer);
    if (!b.predicted || b.positive.empty()) {
      ++out.excluded_clauses;
      continue;
    }
    auto sp = score(c, *b.predicted);
    auto sg = score(c, b.positive);
    if (!sp || !sg || !sp->defined() || !sg->defined()) {
      ++out.excluded_clauses;
      continue;
    }
    auto& v = videos[c.video_id];
    v.predicted.num += sp->num;
    v.predicted.den += sp->den;
    v.gold.num += sg->num;
    v.gold.den += sg->den;
  }
  double total = 0;
  for (const auto& [video, v] : videos) {
    double d = std::abs(v.predicted.value() - v.gold.value()) * 100.0;
    out.per_video[video] = d;
    total += d;
  }
  out.videos = videos.size();
  out.delta_points = videos.empty() ? 0.0 : total / static_cast<double>(videos.size());
  return out;
}

}  // namespace dualfact
