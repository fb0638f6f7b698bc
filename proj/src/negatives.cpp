#include "dualfact/negatives.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dualfact/rng.hpp"
#include "dualfact/text.hpp"
#include "json.hpp"

namespace dualfact {

namespace {

const std::vector<std::string> kNone;

// Word stems with numerals removed; two facts with equal keys differ only in
// numbers or inflection.
std::vector<std::string> inflection_key(const Fact& f) {
  std::string surface = std::holds_alternative<ConceptualFact>(f)
                            ? std::get<ConceptualFact>(f).value()
                            : std::get<ContextualFact>(f).predicate() + " " + std::get<ContextualFact>(f).argument();
  std::vector<std::string> key;
  for (const auto& tok : text::word_tokens(surface))
    if (!text::is_numeral(tok)) key.push_back(text::stem(tok));
  return key;
}

std::optional<std::string> check(const std::vector<Fact>& positives, const NegativeCandidate& c,
                                 const PlausibilityCheck& plausible) {
  const Fact& cand = c.candidate;
  if (c.source != kNoSource) {
    if (c.source >= positives.size()) return std::string(kRuleStructure);
    const Fact& src = positives[c.source];
    if (layer_of(src) != layer_of(cand) || slot_of(src) != slot_of(cand)) return std::string(kRuleStructure);
  } else {
    bool any = std::any_of(positives.begin(), positives.end(), [&](const Fact& p) {
      return layer_of(p) == layer_of(cand) && slot_of(p) == slot_of(cand);
    });
    if (!any) return std::string(kRuleStructure);
  }
  auto key = inflection_key(cand);
  for (const auto& p : positives)
    if (slot_of(p) == slot_of(cand) && inflection_key(p) == key) return std::string(kRuleInflection);
  for (const auto& p : positives)
    if (text::shares_lexical_material(entity_of(cand), entity_of(p))) return std::string(kRuleOverlap);
  if (plausible && !plausible(cand)) return std::string(kRuleImplausible);
  return std::nullopt;
}

Fact substitute(const Fact& source, const std::string& entry) {
  if (const auto* c = std::get_if<ConceptualFact>(&source)) return ConceptualFact::make(c->role(), entry);
  const auto& x = std::get<ContextualFact>(source);
  return ContextualFact::make(x.relation(), x.predicate(), entry);
}

std::vector<std::string> predicates_of(const std::vector<Fact>& facts) {
  std::vector<std::string> out;
  for (const auto& f : facts)
    if (const auto* x = std::get_if<ContextualFact>(&f)) out.push_back(x->predicate());
  return out;
}

// Picks `count` substitutes for positives[index] that pass the filter against
// all positives and are not in `taken`.
std::vector<NegativeCandidate> fallback_for(const std::vector<Fact>& positives, std::size_t index,
                                            const ConfusionLexicon& lexicon, std::uint64_t seed,
                                            std::size_t count, std::set<Fact>& taken) {
  const Fact& source = positives[index];
  std::vector<std::string> order = lexicon.entries_for(source);
  SeededRng rng(text::fnv1a(render(source), seed));
  rng.shuffle(order);
  auto known = predicates_of(positives);
  PlausibilityCheck plausible = [&](const Fact& f) { return lexicon.admits(f, known); };
  std::vector<NegativeCandidate> out;
  for (const auto& entry : order) {
    if (out.size() == count) break;
    NegativeCandidate c{index, substitute(source, entry), Origin::Fallback, std::nullopt};
    if (taken.count(c.candidate)) continue;
    if (check(positives, c, plausible)) continue;
    taken.insert(c.candidate);
    out.push_back(std::move(c));
  }
  if (out.size() < count) throw LexiconExhausted(slot_of(source), render(source));
  return out;
}

}  // namespace

const std::vector<std::string>& ConfusionLexicon::entries_for(const Fact& source) const {
  if (const auto* c = std::get_if<ConceptualFact>(&source)) {
    auto it = conceptual.find(c->role());
    return it == conceptual.end() ? kNone : it->second;
  }
  auto it = contextual.find(std::get<ContextualFact>(source).relation());
  return it == contextual.end() ? kNone : it->second;
}

bool ConfusionLexicon::admits(const Fact& candidate, const std::vector<std::string>& known_predicates) const {
  const auto& list = entries_for(candidate);
  if (std::find(list.begin(), list.end(), entity_of(candidate)) == list.end()) return false;
  if (const auto* x = std::get_if<ContextualFact>(&candidate)) {
    const auto& p = x->predicate();
    return std::find(actions.begin(), actions.end(), p) != actions.end() ||
           std::find(known_predicates.begin(), known_predicates.end(), p) != known_predicates.end();
  }
  return true;
}

ConfusionLexicon ConfusionLexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  ConfusionLexicon lex;
  auto entries = [&](const nlohmann::json& list, const std::string& where) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& v : list) {
      auto n = normalize_entity(v.get<std::string>());
      if (!n) throw FormatError(path.string() + ": empty entry in " + where);
      if (!seen.insert(*n).second) throw FormatError(path.string() + ": repeated entry \"" + *n + "\" in " + where);
      out.push_back(*n);
    }
    if (out.empty()) throw FormatError(path.string() + ": no entries for " + where);
    return out;
  };
  try {
    auto j = nlohmann::json::parse(in);
    lex.domain = j.value("domain", path.stem().string());
    for (const auto& [label, list] : j.at("conceptual").items()) {
      auto role = role_from_label(label);
      if (!role) throw FormatError(path.string() + ": unknown role \"" + label + "\"");
      lex.conceptual[*role] = entries(list, label);
    }
    for (const auto& [name, list] : j.at("contextual").items()) {
      auto rel = relation_from_string(name);
      if (!rel) throw FormatError(path.string() + ": unknown relation \"" + name + "\"");
      lex.contextual[*rel] = entries(list, name);
    }
    if (j.contains("actions")) lex.actions = entries(j["actions"], "actions");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return lex;
}

std::string_view to_string(Origin origin) { return origin == Origin::Backend ? "backend" : "fallback"; }

FilterResult filter_negatives(const std::vector<Fact>& positives, std::vector<NegativeCandidate> candidates,
                              const PlausibilityCheck& plausible) {
  FilterResult out;
  for (auto& c : candidates) {
    c.rejection = check(positives, c, plausible);
    (c.rejection ? out.rejected : out.accepted).push_back(std::move(c));
  }
  return out;
}

std::vector<NegativeCandidate> fallback_substitute(const std::vector<Fact>& positives,
                                                   const ConfusionLexicon& lexicon, std::uint64_t seed,
                                                   std::size_t per_positive) {
  std::set<Fact> taken;
  std::vector<NegativeCandidate> out;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    auto picked = fallback_for(positives, i, lexicon, seed, per_positive, taken);
    out.insert(out.end(), picked.begin(), picked.end());
  }
  return out;
}

std::optional<std::string> pick_target_verb(const std::vector<Fact>& positives, const ConfusionLexicon& lexicon,
                                            std::uint64_t seed) {
  auto known = predicates_of(positives);
  std::vector<std::string> pool;
  for (const auto& a : lexicon.actions) {
    bool clash = std::any_of(known.begin(), known.end(),
                             [&](const std::string& p) { return text::shares_lexical_material(a, p); });
    if (!clash) pool.push_back(a);
  }
  if (pool.empty()) return std::nullopt;
  SeededRng rng(seed);
  return pool[rng.below(pool.size())];
}

NegativeRun generate_negatives(const std::vector<Fact>& positives, Layer layer, TextBackend& backend,
                               const PromptTemplate& tmpl, const NegativeOptions& options) {
  if (positives.empty()) throw PreconditionError("no positive facts for " + options.clause_id);
  for (const auto& p : positives)
    if (layer_of(p) != layer) throw PreconditionError("positive \"" + render(p) + "\" is in the wrong layer");

  NegativeRun run;
  const std::uint64_t seed = text::fnv1a(options.clause_id, options.seed);
  std::map<std::string, std::string> bindings;
  {
    std::vector<std::string> rendered;
    for (const auto& p : positives) rendered.push_back(render(p, options.labels));
    bindings["positives"] = text::join(rendered, ", ");
  }
  if (layer == Layer::Contextual) {
    if (options.lexicon) run.target_verb = pick_target_verb(positives, *options.lexicon, seed);
    bindings["target_verb"] = run.target_verb.value_or("");
  }

  auto known = predicates_of(positives);
  if (run.target_verb) known.push_back(*run.target_verb);
  PlausibilityCheck plausible = options.plausible;
  if (!plausible && options.lexicon)
    plausible = [&](const Fact& f) { return options.lexicon->admits(f, known); };

  std::vector<NegativeCandidate> candidates;
  try {
    std::string raw = backend.complete({tmpl.template_id, tmpl.render(bindings), options.clause_id,
                                        bindings["positives"], layer});
    run.raw_response = raw;
    auto parsed = parse_fact_list(raw, layer);
    std::vector<std::size_t> assigned(positives.size(), 0);
    for (auto& f : parsed.facts) {
      // Pair with the least-used positive of the same slot.
      std::size_t best = kNoSource;
      for (std::size_t i = 0; i < positives.size(); ++i)
        if (slot_of(positives[i]) == slot_of(f) && (best == kNoSource || assigned[i] < assigned[best])) best = i;
      if (best != kNoSource) ++assigned[best];
      candidates.push_back({best, std::move(f), Origin::Backend, std::nullopt});
    }
    for (const auto& frag : parsed.fragments) run.notices.push_back("unparseable fragment: " + frag);
  } catch (const TransportError& e) {
    run.notices.push_back(std::string("backend failed, using lexicon fallback: ") + e.what());
  } catch (const ParseError& e) {
    run.notices.push_back(std::string("unparseable backend response, using lexicon fallback: ") + e.what());
  }

  auto filtered = filter_negatives(positives, std::move(candidates), plausible);
  run.rejected = std::move(filtered.rejected);
  std::vector<std::size_t> per_source(positives.size(), 0);
  std::set<Fact> taken;
  for (auto& c : filtered.accepted) {
    if (taken.count(c.candidate) || per_source[c.source] >= options.per_positive) {
      c.rejection = taken.count(c.candidate) ? "duplicate" : "surplus";
      run.rejected.push_back(std::move(c));
      continue;
    }
    taken.insert(c.candidate);
    ++per_source[c.source];
    run.accepted.push_back(std::move(c));
  }

  for (std::size_t i = 0; i < positives.size(); ++i) {
    std::size_t missing = options.per_positive - per_source[i];
    if (missing == 0) continue;
    if (!options.lexicon) {
      run.notices.push_back("no negative for \"" + render(positives[i]) + "\" and no lexicon to fall back on");
      continue;
    }
    auto picked = fallback_for(positives, i, *options.lexicon, options.seed, missing, taken);
    run.accepted.insert(run.accepted.end(), picked.begin(), picked.end());
  }
  return run;
}

}  // namespace dualfact
