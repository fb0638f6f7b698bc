#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dualfact/error.hpp"

namespace dualfact {

enum class Layer { Conceptual, Contextual };

inline constexpr std::array<Layer, 2> kLayers = {Layer::Conceptual, Layer::Contextual};

std::string_view to_string(Layer layer);
Layer parse_layer(std::string_view s);  // "conceptual" | "contextual"

// Abstract participant roles of a step.
enum class ConceptualRole { Action, IngredientObject, Tool, Location };

inline constexpr std::array<ConceptualRole, 4> kConceptualRoles = {
    ConceptualRole::Action, ConceptualRole::IngredientObject, ConceptualRole::Tool,
    ConceptualRole::Location};

// "Action", "Ingredient/Object", "Tool", "Location".
std::string_view canonical_label(ConceptualRole role);

// Accepts the canonical labels plus the aliases seen in extractor and
// generator output ("Object", "Ingredient", "Object/Ingredient/Material", ...).
std::optional<ConceptualRole> role_from_label(std::string_view label);

// Display labels used when rendering. Only the Ingredient/Object role has a
// dataset-specific alias ("Ingredient" for cooking, "Object" for crafting).
struct RoleLabels {
  std::string ingredient_object{"Ingredient/Object"};

  static RoleLabels with_alias(std::string_view alias);  // validates the alias
  std::string_view label(ConceptualRole role) const;
};

// Verb-argument relations of the contextual layer.
enum class ContextualRelation { Obj, In, On, To, With };

inline constexpr std::array<ContextualRelation, 5> kContextualRelations = {
    ContextualRelation::Obj, ContextualRelation::In, ContextualRelation::On,
    ContextualRelation::To, ContextualRelation::With};

std::string_view to_string(ContextualRelation rel);  // "act/obj", ...
// Accepts "act/ing" as an alias of act/obj.
std::optional<ContextualRelation> relation_from_string(std::string_view s);

class ConceptualFact {
 public:
  // Normalizes the value; throws FormatError if it is unusable.
  static ConceptualFact make(ConceptualRole role, std::string_view value);

  ConceptualRole role() const { return role_; }
  const std::string& value() const { return value_; }

  friend auto operator<=>(const ConceptualFact&, const ConceptualFact&) = default;

 private:
  ConceptualFact(ConceptualRole role, std::string value) : role_(role), value_(std::move(value)) {}
  ConceptualRole role_;
  std::string value_;
};

class ContextualFact {
 public:
  // The predicate is a single verb or a verb plus one particle ("pick up").
  // The argument may not begin with a preposition or particle, otherwise the
  // rendering would be ambiguous.
  static ContextualFact make(ContextualRelation relation, std::string_view predicate,
                             std::string_view argument);

  ContextualRelation relation() const { return relation_; }
  const std::string& predicate() const { return predicate_; }
  const std::string& argument() const { return argument_; }

  friend auto operator<=>(const ContextualFact&, const ContextualFact&) = default;

 private:
  ContextualFact(ContextualRelation r, std::string p, std::string a)
      : relation_(r), predicate_(std::move(p)), argument_(std::move(a)) {}
  ContextualRelation relation_;
  std::string predicate_;
  std::string argument_;
};

using Fact = std::variant<ConceptualFact, ContextualFact>;

std::string render_conceptual(const ConceptualFact& fact, const RoleLabels& labels = {});
std::string render_contextual(const ContextualFact& fact);
std::string render(const Fact& fact, const RoleLabels& labels = {});

Layer layer_of(const Fact& fact);

// Role label or relation name; the grouping key used by every per-type metric.
std::string slot_of(const Fact& fact);

// The entity a fact talks about: the conceptual value or the contextual argument.
const std::string& entity_of(const Fact& fact);

// Canonical value compared for slot-level matching. Conceptual facts compare
// their value; contextual facts compare predicate and argument together.
std::string slot_value(const Fact& fact);

// Slot keys in report column order.
std::vector<std::string> slot_order(Layer layer);

// Lowercase, collapse whitespace, drop leading articles and trailing
// punctuation. Returns nullopt when nothing usable remains. Idempotent.
std::optional<std::string> normalize_entity(std::string_view text);

class ParseError : public FormatError {
 public:
  explicit ParseError(std::string raw)
      : FormatError("unparseable fact list: \"" + raw + "\""), raw_(std::move(raw)) {}
  const std::string& raw_text() const { return raw_; }

 private:
  std::string raw_;
};

struct ParseResult {
  std::vector<Fact> facts;
  std::vector<std::string> fragments;  // items that matched no template
  std::size_t duplicates = 0;          // repeated facts dropped from `facts`
  bool empty_input = false;
};

// Parses a comma-separated backend response. Commas inside parentheses never
// split; for the conceptual layer a comma splits only when the next item
// starts with "<Label> is". Throws ParseError when the text is nonempty and
// not a single fact could be parsed.
ParseResult parse_fact_list(std::string_view text, Layer layer);

// Parses exactly one rendered fact; throws FormatError otherwise.
Fact parse_fact(std::string_view item, Layer layer);

// Removes repeated facts, keeping first occurrences in order.
std::vector<Fact> unique_facts(const std::vector<Fact>& facts);

bool contains(const std::vector<Fact>& facts, const Fact& fact);

// The three fact sets of one clause for one layer.
struct FactBundle {
  std::string clause_id;
  Layer layer = Layer::Conceptual;
  std::vector<Fact> positive;
  std::vector<Fact> negative;
  std::optional<std::vector<Fact>> predicted;
};

}  // namespace dualfact
