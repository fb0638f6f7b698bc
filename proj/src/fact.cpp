#include "dualfact/fact.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "dualfact/text.hpp"

namespace dualfact {

namespace {

constexpr std::array<std::string_view, 12> kParticles = {
    "up", "down", "off", "out", "over", "away", "back", "apart", "together", "aside",
    "around", "through"};

struct PrepositionAlias {
  std::string_view word;
  ContextualRelation relation;
};

// "into"/"onto" are accepted on input only; rendering uses in/on.
constexpr std::array<PrepositionAlias, 6> kPrepositions = {{
    {"in", ContextualRelation::In},
    {"on", ContextualRelation::On},
    {"to", ContextualRelation::To},
    {"with", ContextualRelation::With},
    {"into", ContextualRelation::In},
    {"onto", ContextualRelation::On},
}};

bool is_particle(std::string_view w) {
  return std::find(kParticles.begin(), kParticles.end(), w) != kParticles.end();
}

std::optional<ContextualRelation> preposition_relation(std::string_view w) {
  for (const auto& p : kPrepositions)
    if (p.word == w) return p.relation;
  return std::nullopt;
}

bool is_trailing_punct(char c) {
  return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?';
}

bool balanced_parens(std::string_view s) {
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')' && --depth < 0) return false;
  }
  return depth == 0;
}

bool has_comma_outside_parens(std::string_view s) {
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) return true;
  }
  return false;
}

// Splits on commas and newlines at parenthesis depth zero.
std::vector<std::string> split_items(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')' && depth > 0) --depth;
    if ((c == ',' && depth == 0) || c == '\n' || c == '\r') {
      out.push_back(cur);
      cur.clear();
      continue;
    }
    cur.push_back(c);
  }
  out.push_back(cur);
  return out;
}

std::string strip_item(std::string_view item) {
  std::string s = text::collapse_whitespace(item);
  while (!s.empty() && (s.back() == '.' || s.back() == ' ')) s.pop_back();
  return s;
}

// Position of the " is " separator of a conceptual item, case-insensitive.
std::optional<std::size_t> find_is(std::string_view s) {
  for (std::size_t i = 0; i + 4 <= s.size(); ++i)
    if (text::equals_ci(s.substr(i, 4), " is ")) return i;
  return std::nullopt;
}

bool starts_with_label(std::string_view item) {
  std::string s = text::collapse_whitespace(item);
  auto pos = find_is(s);
  return pos && role_from_label(std::string_view(s).substr(0, *pos)).has_value();
}

bool valid_predicate_token(std::string_view w) {
  if (w.empty() || !std::isalpha(static_cast<unsigned char>(w.front()))) return false;
  return std::all_of(w.begin(), w.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '\'';
  });
}

std::optional<Fact> try_parse_conceptual(std::string_view item) {
  std::string s = strip_item(item);
  auto pos = find_is(s);
  if (!pos) return std::nullopt;
  auto role = role_from_label(std::string_view(s).substr(0, *pos));
  if (!role) return std::nullopt;
  try {
    return ConceptualFact::make(*role, std::string_view(s).substr(*pos + 4));
  } catch (const FormatError&) {
    return std::nullopt;
  }
}

std::optional<Fact> try_parse_contextual(std::string_view item) {
  auto words = text::split_words(text::to_lower(strip_item(item)));
  if (words.size() < 2) return std::nullopt;
  std::string predicate = words[0];
  std::size_t i = 1;
  if (words.size() > 2 && is_particle(words[1])) {
    predicate += " " + words[1];
    i = 2;
  }
  auto relation = ContextualRelation::Obj;
  if (auto rel = preposition_relation(words[i]); rel && i + 1 < words.size()) {
    relation = *rel;
    ++i;
  }
  std::vector<std::string> rest(words.begin() + static_cast<std::ptrdiff_t>(i), words.end());
  try {
    return ContextualFact::make(relation, predicate, text::join(rest, " "));
  } catch (const FormatError&) {
    return std::nullopt;
  }
}

}  // namespace

std::string_view to_string(Layer layer) {
  return layer == Layer::Conceptual ? "conceptual" : "contextual";
}

Layer parse_layer(std::string_view s) {
  if (s == "conceptual") return Layer::Conceptual;
  if (s == "contextual") return Layer::Contextual;
  throw FormatError("unknown layer \"" + std::string(s) + "\"");
}

std::string_view canonical_label(ConceptualRole role) {
  switch (role) {
    case ConceptualRole::Action: return "Action";
    case ConceptualRole::IngredientObject: return "Ingredient/Object";
    case ConceptualRole::Tool: return "Tool";
    case ConceptualRole::Location: return "Location";
  }
  return "";
}

std::optional<ConceptualRole> role_from_label(std::string_view label) {
  std::string l = text::to_lower(text::collapse_whitespace(label));
  if (l == "action" || l == "actiontype" || l == "action type") return ConceptualRole::Action;
  if (l == "ingredient/object" || l == "object/ingredient" || l == "ingredient" ||
      l == "object" || l == "material" || l == "object/ingredient/material" ||
      l == "ingredient/object/material" || l == "object/material")
    return ConceptualRole::IngredientObject;
  if (l == "tool") return ConceptualRole::Tool;
  if (l == "location") return ConceptualRole::Location;
  return std::nullopt;
}

RoleLabels RoleLabels::with_alias(std::string_view alias) {
  if (role_from_label(alias) != ConceptualRole::IngredientObject)
    throw FormatError("\"" + std::string(alias) + "\" is not an Ingredient/Object alias");
  RoleLabels labels;
  labels.ingredient_object = text::trim(alias);
  return labels;
}

std::string_view RoleLabels::label(ConceptualRole role) const {
  if (role == ConceptualRole::IngredientObject) return ingredient_object;
  return canonical_label(role);
}

std::string_view to_string(ContextualRelation rel) {
  switch (rel) {
    case ContextualRelation::Obj: return "act/obj";
    case ContextualRelation::In: return "act/in";
    case ContextualRelation::On: return "act/on";
    case ContextualRelation::To: return "act/to";
    case ContextualRelation::With: return "act/with";
  }
  return "";
}

std::optional<ContextualRelation> relation_from_string(std::string_view s) {
  std::string l = text::to_lower(text::trim(s));
  if (l == "act/ing") return ContextualRelation::Obj;
  for (auto r : kContextualRelations)
    if (to_string(r) == l) return r;
  return std::nullopt;
}

ConceptualFact ConceptualFact::make(ConceptualRole role, std::string_view value) {
  auto v = normalize_entity(value);
  if (!v) throw FormatError("empty conceptual value");
  if (!balanced_parens(*v)) throw FormatError("unbalanced parentheses in \"" + *v + "\"");
  // A comma followed by "<Label> is" would split the rendered list.
  for (std::size_t i = 0; i < v->size(); ++i) {
    if ((*v)[i] == ',' && starts_with_label(std::string_view(*v).substr(i + 1)))
      throw FormatError("value \"" + *v + "\" embeds another fact");
  }
  return ConceptualFact(role, std::move(*v));
}

ContextualFact ContextualFact::make(ContextualRelation relation, std::string_view predicate,
                                    std::string_view argument) {
  auto words = text::split_words(text::to_lower(predicate));
  if (words.empty() || words.size() > 2) throw FormatError("predicate must be one verb or a phrasal verb");
  for (const auto& w : words)
    if (!valid_predicate_token(w)) throw FormatError("invalid predicate token \"" + w + "\"");
  if (is_particle(words[0]) || preposition_relation(words[0]))
    throw FormatError("predicate cannot start with \"" + words[0] + "\"");
  if (words.size() == 2 && !is_particle(words[1]))
    throw FormatError("\"" + words[1] + "\" is not a verb particle");

  auto arg = normalize_entity(argument);
  if (!arg) throw FormatError("empty contextual argument");
  auto first = text::split_words(*arg).front();
  if (is_particle(first) || preposition_relation(first))
    throw FormatError("argument \"" + *arg + "\" starts with a preposition or particle");
  if (!balanced_parens(*arg) || has_comma_outside_parens(*arg))
    throw FormatError("argument \"" + *arg + "\" contains a list separator");
  return ContextualFact(relation, text::join(words, " "), std::move(*arg));
}

std::string render_conceptual(const ConceptualFact& fact, const RoleLabels& labels) {
  std::string out(labels.label(fact.role()));
  out += " is ";
  out += fact.value();
  out += '.';
  return out;
}

std::string render_contextual(const ContextualFact& fact) {
  std::string out = fact.predicate();
  switch (fact.relation()) {
    case ContextualRelation::Obj: break;
    case ContextualRelation::In: out += " in"; break;
    case ContextualRelation::On: out += " on"; break;
    case ContextualRelation::To: out += " to"; break;
    case ContextualRelation::With: out += " with"; break;
  }
  out += ' ';
  out += fact.argument();
  return out;
}

std::string render(const Fact& fact, const RoleLabels& labels) {
  if (const auto* c = std::get_if<ConceptualFact>(&fact)) return render_conceptual(*c, labels);
  return render_contextual(std::get<ContextualFact>(fact));
}

Layer layer_of(const Fact& fact) {
  return std::holds_alternative<ConceptualFact>(fact) ? Layer::Conceptual : Layer::Contextual;
}

std::string slot_of(const Fact& fact) {
  if (const auto* c = std::get_if<ConceptualFact>(&fact))
    return std::string(canonical_label(c->role()));
  return std::string(to_string(std::get<ContextualFact>(fact).relation()));
}

const std::string& entity_of(const Fact& fact) {
  if (const auto* c = std::get_if<ConceptualFact>(&fact)) return c->value();
  return std::get<ContextualFact>(fact).argument();
}

std::string slot_value(const Fact& fact) {
  if (const auto* c = std::get_if<ConceptualFact>(&fact)) return c->value();
  const auto& x = std::get<ContextualFact>(fact);
  return x.predicate() + "|" + x.argument();
}

std::vector<std::string> slot_order(Layer layer) {
  std::vector<std::string> out;
  if (layer == Layer::Conceptual) {
    // Report column order: Action, Object, Location, Tool.
    for (auto r : {ConceptualRole::Action, ConceptualRole::IngredientObject,
                   ConceptualRole::Location, ConceptualRole::Tool})
      out.emplace_back(canonical_label(r));
  } else {
    for (auto r : kContextualRelations) out.emplace_back(to_string(r));
  }
  return out;
}

std::optional<std::string> normalize_entity(std::string_view input) {
  std::string s = text::collapse_whitespace(text::to_lower(input));
  for (bool changed = true; changed;) {
    changed = false;
    while (!s.empty() && (is_trailing_punct(s.back()) || s.back() == ' ')) {
      s.pop_back();
      changed = true;
    }
    for (std::string_view article : {"a ", "an ", "the "}) {
      if (s.size() > article.size() && s.compare(0, article.size(), article) == 0) {
        s.erase(0, article.size());
        changed = true;
      }
    }
  }
  if (s.empty()) return std::nullopt;
  return s;
}

ParseResult parse_fact_list(std::string_view input, Layer layer) {
  ParseResult result;
  if (text::trim(input).empty()) {
    result.empty_input = true;
    return result;
  }

  std::vector<std::string> items;
  for (auto& piece : split_items(input)) {
    if (text::trim(piece).empty()) continue;
    if (layer == Layer::Conceptual && !items.empty() && !starts_with_label(piece)) {
      items.back() += "," + piece;
      continue;
    }
    items.push_back(std::move(piece));
  }

  for (const auto& item : items) {
    auto fact = layer == Layer::Conceptual ? try_parse_conceptual(item) : try_parse_contextual(item);
    if (!fact) {
      result.fragments.push_back(text::trim(item));
    } else if (contains(result.facts, *fact)) {
      ++result.duplicates;
    } else {
      result.facts.push_back(std::move(*fact));
    }
  }
  if (result.facts.empty()) throw ParseError(std::string(input));
  return result;
}

Fact parse_fact(std::string_view item, Layer layer) {
  auto fact = layer == Layer::Conceptual ? try_parse_conceptual(item) : try_parse_contextual(item);
  if (!fact)
    throw FormatError("\"" + std::string(item) + "\" is not a " + std::string(to_string(layer)) +
                      " fact");
  return *fact;
}

std::vector<Fact> unique_facts(const std::vector<Fact>& facts) {
  std::vector<Fact> out;
  std::set<Fact> seen;
  for (const auto& f : facts)
    if (seen.insert(f).second) out.push_back(f);
  return out;
}

bool contains(const std::vector<Fact>& facts, const Fact& fact) {
  return std::find(facts.begin(), facts.end(), fact) != facts.end();
}

}  // namespace dualfact
