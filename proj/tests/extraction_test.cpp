#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "dualfact/extraction.hpp"
#include "test_util.hpp"

using namespace dualfact;

namespace {

PromptTemplate tmpl(Layer layer) {
  return PromptTemplate::load(testutil::data(layer == Layer::Conceptual ? "templates/extract_conceptual.json"
                                                                        : "templates/extract_contextual.json"));
}

using FactMap = std::map<std::string, std::vector<Fact>>;

// Counting oracle over flat (clause, slot, key) triples.
std::map<std::string, Tally> oracle_tally(const FactMap& pred, const FactMap& gold) {
  using Triple = std::tuple<std::string, std::string, std::string>;
  std::set<Triple> p, g;
  for (const auto& [c, fs] : pred)
    for (const auto& f : fs) p.insert({c, slot_of(f), slot_value(f)});
  for (const auto& [c, fs] : gold)
    for (const auto& f : fs) g.insert({c, slot_of(f), slot_value(f)});
  std::map<std::string, Tally> out;
  for (const auto& t : p) {
    auto& tally = out[std::get<1>(t)];
    if (g.count(t))
      tally.tp++;
    else
      tally.fp++;
  }
  for (const auto& t : g)
    if (!p.count(t)) out[std::get<1>(t)].fn++;
  return out;
}

}  // namespace

TEST_CASE("mock passthrough") {
  LookupTextBackend b("m", {{"c1", {"Action is cutting., Ingredient/Object is onion."}}});
  auto r = extract_facts("cut the onion", Layer::Conceptual, b, tmpl(Layer::Conceptual), "c1");
  REQUIRE(r.facts.size() == 2);
  CHECK(r.facts[0] == Fact(ConceptualFact::make(ConceptualRole::Action, "cutting")));
  CHECK(r.facts[1] == Fact(ConceptualFact::make(ConceptualRole::IngredientObject, "onion")));
  CHECK(r.log.attempts == 1);
  CHECK(r.log.raw_responses.size() == 1);
}

TEST_CASE("one retry, then the clause is flagged") {
  LookupTextBackend twice("g", {{"c1", {"???", "!!!"}}});
  try {
    extract_facts("cut", Layer::Conceptual, twice, tmpl(Layer::Conceptual), "c1");
    FAIL("expected ExtractionError");
  } catch (const ExtractionError& e) {
    CHECK(e.log().attempts == 2);
    CHECK(e.log().raw_responses == std::vector<std::string>{"???", "!!!"});
  }
  LookupTextBackend recover("r", {{"c1", {"???", "Tool is knife."}}});
  auto r = extract_facts("cut", Layer::Conceptual, recover, tmpl(Layer::Conceptual), "c1");
  CHECK(r.log.attempts == 2);
  CHECK(r.facts.size() == 1);
}

TEST_CASE("fragments are logged, empty responses are flagged as empty") {
  LookupTextBackend b("m", {{"c1", {"cut onion, ???"}}, {"c2", {""}}});
  auto r = extract_facts("cut", Layer::Contextual, b, tmpl(Layer::Contextual), "c1");
  CHECK(r.facts.size() == 1);
  CHECK(r.log.fragments == std::vector<std::string>{"???"});
  auto e = extract_facts("cut", Layer::Contextual, b, tmpl(Layer::Contextual), "c2");
  CHECK(e.facts.empty());
  CHECK(e.log.empty_input);
}

TEST_CASE("preconditions and transport errors") {
  RuleExtractor rule;
  CHECK_THROWS_AS(extract_facts(" ", Layer::Conceptual, rule, tmpl(Layer::Conceptual), "c"), PreconditionError);
  CHECK_THROWS_AS(extract_facts("cut", Layer::Contextual, rule, tmpl(Layer::Conceptual), "c"), PreconditionError);
  LookupTextBackend empty("e", {});
  CHECK_THROWS_AS(extract_facts("cut", Layer::Conceptual, empty, tmpl(Layer::Conceptual), "c"), TransportError);
}

TEST_CASE("rule extractor over the VIA caption yields the four roles") {
  RuleExtractor rule;
  auto r = extract_facts("Stir the soup with a spoon in the pot.", Layer::Conceptual, rule,
                         tmpl(Layer::Conceptual), "c");
  std::vector<Fact> expected = {ConceptualFact::make(ConceptualRole::Action, "stirring"),
                                ConceptualFact::make(ConceptualRole::IngredientObject, "soup"),
                                ConceptualFact::make(ConceptualRole::Tool, "spoon"),
                                ConceptualFact::make(ConceptualRole::Location, "pot")};
  CHECK(r.facts == expected);
}

TEST_CASE("dataset extraction flags failures and keeps going") {
  auto ds = load_dataset(testutil::data("fixtures/youcook3_10.jsonl"));
  std::map<std::string, std::vector<std::string>> script;
  for (const auto& c : ds.clauses) script[c.clause_id] = {"Tool is knife."};
  script["yc3_v001_c02"] = {"garbage", "garbage"};
  script.erase("yc3_v002_c01");
  LookupTextBackend b("m", script);
  for (std::size_t workers : {1u, 4u}) {
    auto run = extract_dataset(ds, Layer::Conceptual, b, tmpl(Layer::Conceptual), {false, workers});
    CHECK(run.logs.size() == 10);
    CHECK(run.flagged() == 2);
    CHECK(run.predicted.size() == 8);
    CHECK(run.logs[1].clause_id == "yc3_v001_c02");
    CHECK_FALSE(run.logs[1].transport_failure);
    CHECK(run.logs[5].transport_failure);
  }
}

TEST_CASE("eval_extraction: identity and the two-ingredient hand case") {
  auto ds = load_dataset(testutil::data("fixtures/craftbench_10.jsonl"));
  for (auto layer : kLayers) {
    FactMap gold;
    for (const auto& c : ds.clauses) gold[c.clause_id] = c.bundle(layer).positive;
    auto m = eval_extraction(gold, gold, layer);
    CHECK_FALSE(m.slots.empty());
    for (const auto& s : m.slots) CHECK(m.per_slot[s].f1 == 1.0);
    CHECK(m.micro.f1 == 1.0);
    CHECK(m.macro.f1 == 1.0);
  }
  FactMap gold{{"c", {ConceptualFact::make(ConceptualRole::IngredientObject, "onion"),
                      ConceptualFact::make(ConceptualRole::IngredientObject, "garlic")}}};
  FactMap pred{{"c", {ConceptualFact::make(ConceptualRole::IngredientObject, "onion")}}};
  auto m = eval_extraction(pred, gold, Layer::Conceptual);
  auto s = m.per_slot.at("Ingredient/Object");
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(m.slots == std::vector<std::string>{"Ingredient/Object"});
  CHECK_THROWS_AS(eval_extraction({}, gold, Layer::Conceptual), PreconditionError);
  CHECK_THROWS_AS(eval_extraction({{"other", {}}}, gold, Layer::Conceptual), PreconditionError);
}

TEST_CASE("eval_extraction matches a counting oracle on random fixtures") {
  std::mt19937 rng(20261019);
  for (int trial = 0; trial < 200; ++trial) {
    auto layer = kLayers[trial % 2];
    FactMap gold, pred;
    int clauses = 1 + static_cast<int>(testutil::below(rng, 8));
    for (int c = 0; c < clauses; ++c) {
      std::string id = "c" + std::to_string(c);
      std::vector<Fact> g, p;
      for (std::size_t k = testutil::below(rng, 6); k > 0; --k) g.push_back(testutil::random_fact(rng, layer));
      for (const auto& f : g)
        if (testutil::below(rng, 3)) p.push_back(f);
      for (std::size_t k = testutil::below(rng, 4); k > 0; --k) p.push_back(testutil::random_fact(rng, layer));
      gold[id] = unique_facts(g);
      pred[id] = unique_facts(p);
    }
    auto m = eval_extraction(pred, gold, layer);
    auto oracle = oracle_tally(pred, gold);
    CHECK(m.tallies == oracle);
    Tally micro;
    for (const auto& [slot, t] : oracle) micro += t;
    CHECK(m.micro_tally == micro);
    // Clause order does not matter: rename clauses in reverse.
    FactMap gr, pr;
    int i = 0;
    for (auto it = gold.rbegin(); it != gold.rend(); ++it, ++i) {
      gr["z" + std::to_string(i)] = it->second;
      pr["z" + std::to_string(i)] = pred[it->first];
    }
    CHECK(eval_extraction(pr, gr, layer).tallies == m.tallies);
  }
}

TEST_CASE("synonyms merge values before matching") {
  FactMap gold{{"c", {ConceptualFact::make(ConceptualRole::Location, "skillet")}}};
  FactMap pred{{"c", {ConceptualFact::make(ConceptualRole::Location, "frying pan")}}};
  CHECK(eval_extraction(pred, gold, Layer::Conceptual).micro.f1 == 0.0);
  SynonymTable syn{{"frying pan", "skillet"}};
  CHECK(eval_extraction(pred, gold, Layer::Conceptual, syn).micro.f1 == 1.0);
}

TEST_CASE("sensitivity analysis") {
  auto ds = load_dataset(testutil::data("fixtures/youcook3_10.jsonl"));
  ClauseScorer gold_membership = [](const ClauseRecord& c, const std::vector<Fact>& facts) -> std::optional<Ratio> {
    Ratio r{0, static_cast<std::int64_t>(facts.size())};
    for (const auto& f : facts) r.num += contains(c.conceptual.positive, f);
    return r;
  };
  for (auto& c : ds.clauses) c.conceptual.predicted = c.conceptual.positive;
  auto same = sensitivity_analysis(ds, Layer::Conceptual, gold_membership);
  CHECK(same.delta_points == 0.0);
  CHECK(same.videos == 2);
  CHECK(same.excluded_clauses == 0);

  // One video, ten facts, one of them swapped for a refuted negative.
  Dataset one;
  for (const auto& c : ds.clauses)
    if (c.video_id == "yc3_v001") one.clauses.push_back(c);
  std::vector<Fact> all;
  for (auto& c : one.clauses) all.insert(all.end(), c.conceptual.positive.begin(), c.conceptual.positive.end());
  REQUIRE(all.size() >= 10);
  // Keep exactly ten positive facts in the video.
  std::size_t kept = 0;
  for (auto& c : one.clauses) {
    std::vector<Fact> p;
    for (const auto& f : c.conceptual.positive)
      if (kept < 10) p.push_back(f), ++kept;
    c.conceptual.positive = p;
    c.conceptual.predicted = p;
  }
  one.clauses.erase(std::remove_if(one.clauses.begin(), one.clauses.end(),
                                   [](const ClauseRecord& c) { return c.conceptual.positive.empty(); }),
                    one.clauses.end());
  (*one.clauses[0].conceptual.predicted)[0] = one.clauses[0].conceptual.negative[0];
  auto flipped = sensitivity_analysis(one, Layer::Conceptual, gold_membership);
  CHECK(flipped.delta_points == doctest::Approx(10.0).epsilon(1e-12));

  one.clauses[1].conceptual.predicted.reset();
  CHECK(sensitivity_analysis(one, Layer::Conceptual, gold_membership).excluded_clauses == 1);
}
