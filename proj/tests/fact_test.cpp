#include <random>
#include <set>

#include "doctest.h"
#include "dualfact/fact.hpp"

using namespace dualfact;

namespace {

const std::vector<std::string> kNouns = {
    "onion", "pot", "spoon", "wooden plank", "cutting board", "olive oil", "drill",
    "metal frame", "soup", "garlic clove", "bowl", "sandpaper", "screw", "tray",
    "frying pan", "salt", "wood glue", "hammer", "counter", "chicken breast"};
const std::vector<std::string> kVerbs = {"cut", "stir", "add", "peel", "sand", "drill",
                                         "pour", "place", "whisk", "tighten", "pick up",
                                         "put down", "measure", "attach"};

std::string pick(std::mt19937& rng, const std::vector<std::string>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

TEST_CASE("render_conceptual instantiates the role template") {
  CHECK(render_conceptual(ConceptualFact::make(ConceptualRole::Action, "measuring")) ==
        "Action is measuring.");
  CHECK(render_conceptual(ConceptualFact::make(ConceptualRole::Tool, "spoon")) == "Tool is spoon.");
  CHECK(render_conceptual(ConceptualFact::make(ConceptualRole::Location, "pot")) ==
        "Location is pot.");
  CHECK(render_conceptual(ConceptualFact::make(ConceptualRole::IngredientObject, "onion")) ==
        "Ingredient/Object is onion.");
  CHECK(render_conceptual(ConceptualFact::make(ConceptualRole::IngredientObject, "plastic"),
                          RoleLabels::with_alias("Object")) == "Object is plastic.");
  CHECK_THROWS_AS(RoleLabels::with_alias("Tool"), FormatError);
}

TEST_CASE("conceptual values are normalized and never keep a final period") {
  auto f = ConceptualFact::make(ConceptualRole::Tool, "  The Spoon.");
  CHECK(f.value() == "spoon");
  CHECK(render_conceptual(f) == "Tool is spoon.");
  CHECK_THROWS_AS(ConceptualFact::make(ConceptualRole::Tool, " . "), FormatError);
}

TEST_CASE("render_contextual follows the relation pattern") {
  CHECK(render_contextual(ContextualFact::make(ContextualRelation::Obj, "cut", "metal")) ==
        "cut metal");
  CHECK(render_contextual(ContextualFact::make(ContextualRelation::With, "stir", "spoon")) ==
        "stir with spoon");
  CHECK(render_contextual(ContextualFact::make(ContextualRelation::To, "add", "bowl")) ==
        "add to bowl");
  CHECK(render_contextual(ContextualFact::make(ContextualRelation::In, "stir", "pot")) ==
        "stir in pot");
  CHECK(render_contextual(ContextualFact::make(ContextualRelation::On, "place", "tray")) ==
        "place on tray");
}

TEST_CASE("contextual construction rejects ambiguous shapes") {
  CHECK_THROWS_AS(ContextualFact::make(ContextualRelation::Obj, "stir", "with spoon"), FormatError);
  CHECK_THROWS_AS(ContextualFact::make(ContextualRelation::Obj, "attach", "back panel"),
                  FormatError);
  CHECK_THROWS_AS(ContextualFact::make(ContextualRelation::Obj, "cut the", "onion"), FormatError);
  CHECK_THROWS_AS(ContextualFact::make(ContextualRelation::Obj, "cut", ""), FormatError);
  CHECK_THROWS_AS(ContextualFact::make(ContextualRelation::Obj, "add", "salt, pepper"), FormatError);
  CHECK_NOTHROW(ContextualFact::make(ContextualRelation::Obj, "add", "spices (salt, pepper)"));
}

TEST_CASE("normalize_entity rules") {
  CHECK(normalize_entity("The Onion ") == "onion");
  CHECK(normalize_entity("onion") == "onion");
  CHECK(normalize_entity("a wooden plank.") == "wooden plank");
  CHECK(normalize_entity("the the  pot ;.") == "pot");
  CHECK_FALSE(normalize_entity("  ...").has_value());
  CHECK_FALSE(normalize_entity("").has_value());
}

TEST_CASE("normalize_entity is idempotent and trimmed over random strings") {
  std::mt19937 rng(1234);
  const std::string alphabet = "aAthe n.,;!? \tTHEoxy";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    int len = std::uniform_int_distribution<int>(0, 18)(rng);
    for (int k = 0; k < len; ++k)
      s.push_back(alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)]);
    if (i % 3 == 0) s = "The " + pick(rng, kNouns) + s;
    auto once = normalize_entity(s);
    if (!once) continue;
    CHECK(normalize_entity(*once) == once);
    CHECK(once->front() != ' ');
    CHECK(once->back() != ' ');
  }
}

TEST_CASE("parse_fact_list on backend responses") {
  auto r = parse_fact_list("Action is whisking., Tool is peeler.", Layer::Conceptual);
  REQUIRE(r.facts.size() == 2);
  CHECK(r.facts[0] == Fact{ConceptualFact::make(ConceptualRole::Action, "whisking")});
  CHECK(r.facts[1] == Fact{ConceptualFact::make(ConceptualRole::Tool, "peeler")});
  CHECK(r.fragments.empty());

  auto empty = parse_fact_list("", Layer::Conceptual);
  CHECK(empty.empty_input);
  CHECK(empty.facts.empty());
  CHECK(empty.fragments.empty());

  auto ctx = parse_fact_list("add tomato, add with spoon, peel onion", Layer::Contextual);
  REQUIRE(ctx.facts.size() == 3);
  CHECK(ctx.facts[0] == Fact{ContextualFact::make(ContextualRelation::Obj, "add", "tomato")});
  CHECK(ctx.facts[1] == Fact{ContextualFact::make(ContextualRelation::With, "add", "spoon")});
  CHECK(ctx.facts[2] == Fact{ContextualFact::make(ContextualRelation::Obj, "peel", "onion")});
}

TEST_CASE("parse_fact_list keeps fragments and splits conservatively") {
  auto r = parse_fact_list("Action is measuring., Object is plastic., Tool is hammer., Location is floor.\n"
                           "Action is whisking., Ingredient is potato., nonsense here",
                           Layer::Conceptual);
  CHECK(r.facts.size() == 6);
  // The trailing piece does not start a new fact, so it joins the previous item.
  CHECK(r.facts.back() == Fact{ConceptualFact::make(ConceptualRole::IngredientObject,
                                                    "potato., nonsense here")});

  auto commas = parse_fact_list("Ingredient is salt, pepper., Tool is spoon.", Layer::Conceptual);
  REQUIRE(commas.facts.size() == 2);
  CHECK(entity_of(commas.facts[0]) == "salt, pepper");

  auto frag = parse_fact_list("Colour is red., Tool is knife.", Layer::Conceptual);
  CHECK(frag.facts.size() == 1);
  REQUIRE(frag.fragments.size() == 1);
  CHECK(frag.fragments[0] == "Colour is red.");

  auto ctx = parse_fact_list("add spices (salt, pepper), stir, act/ing alias", Layer::Contextual);
  CHECK(ctx.facts.size() == 1);
  CHECK(ctx.fragments == std::vector<std::string>{"stir", "act/ing alias"});

  auto dup = parse_fact_list("cut onion, cut onion", Layer::Contextual);
  CHECK(dup.facts.size() == 1);
  CHECK(dup.duplicates == 1);

  auto into = parse_fact_list("pour into bowl, place onto tray", Layer::Contextual);
  CHECK(into.facts[0] == Fact{ContextualFact::make(ContextualRelation::In, "pour", "bowl")});
  CHECK(render(into.facts[1]) == "place on tray");
}

TEST_CASE("wholly unparseable responses raise ParseError with the raw text") {
  try {
    parse_fact_list("I cannot help with that", Layer::Conceptual);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.raw_text() == "I cannot help with that");
  }
  CHECK_THROWS_AS(parse_fact_list("hello", Layer::Contextual), ParseError);
}

TEST_CASE("relation aliases") {
  CHECK(relation_from_string("act/ing") == ContextualRelation::Obj);
  CHECK(relation_from_string("act/with") == ContextualRelation::With);
  CHECK_FALSE(relation_from_string("act/under").has_value());
  CHECK(role_from_label("Object/Ingredient/Material") == ConceptualRole::IngredientObject);
  CHECK_FALSE(role_from_label("Colour").has_value());
}

TEST_CASE("render then parse is the identity (conceptual, 100 random pairs)") {
  std::mt19937 rng(7);
  for (int i = 0; i < 100; ++i) {
    auto role = kConceptualRoles[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
    auto fact = ConceptualFact::make(role, pick(rng, kNouns));
    auto parsed = parse_fact_list(render_conceptual(fact), Layer::Conceptual);
    REQUIRE(parsed.facts.size() == 1);
    CHECK(parsed.facts[0] == Fact{fact});
    CHECK(parse_fact(render_conceptual(fact, RoleLabels::with_alias("Ingredient")),
                     Layer::Conceptual) == Fact{fact});
  }
}

TEST_CASE("render then parse is the identity (contextual, all relations)") {
  std::mt19937 rng(11);
  for (auto rel : kContextualRelations) {
    for (int i = 0; i < 40; ++i) {
      auto fact = ContextualFact::make(rel, pick(rng, kVerbs), pick(rng, kNouns));
      auto parsed = parse_fact_list(render_contextual(fact), Layer::Contextual);
      REQUIRE(parsed.facts.size() == 1);
      CHECK(parsed.facts[0] == Fact{fact});
    }
  }
}

TEST_CASE("rendering is injective within a layer") {
  std::set<std::string> rendered;
  std::set<Fact> facts;
  for (auto role : kConceptualRoles)
    for (const auto& n : kNouns) {
      Fact f = ConceptualFact::make(role, n);
      facts.insert(f);
      rendered.insert(render(f));
    }
  CHECK(rendered.size() == facts.size());

  rendered.clear();
  facts.clear();
  for (auto rel : kContextualRelations)
    for (const auto& v : kVerbs)
      for (const auto& n : kNouns) {
        Fact f = ContextualFact::make(rel, v, n);
        facts.insert(f);
        rendered.insert(render(f));
      }
  CHECK(rendered.size() == facts.size());
}

TEST_CASE("a list of rendered facts parses back in order") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Fact> facts;
    std::string joined;
    for (int k = 0; k < 4; ++k) {
      Fact f = ContextualFact::make(kContextualRelations[static_cast<std::size_t>(k) % 5],
                                    pick(rng, kVerbs), pick(rng, kNouns));
      if (contains(facts, f)) continue;
      if (!facts.empty()) joined += ", ";
      joined += render(f);
      facts.push_back(f);
    }
    CHECK(parse_fact_list(joined, Layer::Contextual).facts == facts);
  }
}
