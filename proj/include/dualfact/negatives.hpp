#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualfact/backend.hpp"
#include "dualfact/template.hpp"

namespace dualfact {

// Substitute values per role and relation for one domain, plus the verbs
// offered as target negative actions.
struct ConfusionLexicon {
  std::string domain;
  std::map<ConceptualRole, std::vector<std::string>> conceptual;
  std::map<ContextualRelation, std::vector<std::string>> contextual;
  std::vector<std::string> actions;

  // Entries for the slot of `source`; empty when the lexicon has none.
  const std::vector<std::string>& entries_for(const Fact& source) const;
  // Default plausibility check: the candidate's value (or argument) is a
  // lexicon entry for its slot, and a contextual predicate is either a
  // lexicon action or one of `known_predicates`.
  bool admits(const Fact& candidate, const std::vector<std::string>& known_predicates = {}) const;

  static ConfusionLexicon load(const std::filesystem::path& path);
};

enum class Origin { Backend, Fallback };
std::string_view to_string(Origin origin);

inline constexpr std::size_t kNoSource = std::numeric_limits<std::size_t>::max();

struct NegativeCandidate {
  std::size_t source = kNoSource;  // index into the positives
  Fact candidate;
  Origin origin = Origin::Backend;
  std::optional<std::string> rejection;  // rule id
};

// Rule ids, in the order they are checked.
inline constexpr std::string_view kRuleStructure = "structure";
inline constexpr std::string_view kRuleInflection = "inflection-or-numeral";
inline constexpr std::string_view kRuleOverlap = "lexical-overlap";
inline constexpr std::string_view kRuleImplausible = "implausible";

using PlausibilityCheck = std::function<bool(const Fact&)>;

struct FilterResult {
  std::vector<NegativeCandidate> accepted;  // input order
  std::vector<NegativeCandidate> rejected;  // input order, rule id set
};

// Rejects candidates that (structure) change the slot of their source or
// leave the layer, (inflection-or-numeral) equal a positive once numerals are
// dropped and words stemmed, (lexical-overlap) share a stem or a 3+ character
// substring with any positive value of the clause, (implausible) fail the
// plausibility check. Values are compared on the entity: the conceptual value
// or the contextual argument.
FilterResult filter_negatives(const std::vector<Fact>& positives, std::vector<NegativeCandidate> candidates,
                              const PlausibilityCheck& plausible = nullptr);

class LexiconExhausted : public Error {
 public:
  LexiconExhausted(std::string slot, const std::string& source)
      : Error("lexicon exhausted for " + slot + " (source \"" + source + "\")"), slot_(std::move(slot)) {}
  const std::string& slot() const { return slot_; }

 private:
  std::string slot_;
};

// For each positive, walks the slot's lexicon entries in a seeded order and
// keeps the first `per_positive` that survive filter_negatives. Contextual
// substitutes keep the source predicate. Throws LexiconExhausted.
std::vector<NegativeCandidate> fallback_substitute(const std::vector<Fact>& positives,
                                                   const ConfusionLexicon& lexicon, std::uint64_t seed,
                                                   std::size_t per_positive = 1);

struct NegativeOptions {
  const ConfusionLexicon* lexicon = nullptr;  // required for fallback and default plausibility
  std::uint64_t seed = 0;
  std::size_t per_positive = 1;
  RoleLabels labels;
  std::string clause_id;
  PlausibilityCheck plausible;  // overrides lexicon membership when set
};

struct NegativeRun {
  std::vector<NegativeCandidate> accepted;
  std::vector<NegativeCandidate> rejected;
  std::vector<std::string> notices;
  std::optional<std::string> raw_response;
  std::optional<std::string> target_verb;  // contextual only
};

// Asks the backend for candidates, filters them, and fills any positive left
// without enough accepted negatives from the lexicon. Backend or parse
// failures fall back to the lexicon for every positive, with a notice.
// Throws PreconditionError when `positives` is empty.
NegativeRun generate_negatives(const std::vector<Fact>& positives, Layer layer, TextBackend& backend,
                               const PromptTemplate& tmpl, const NegativeOptions& options);

// Seeded pick of a lexicon action sharing nothing with the positive predicates.
std::optional<std::string> pick_target_verb(const std::vector<Fact>& positives, const ConfusionLexicon& lexicon,
                                            std::uint64_t seed);

}  // namespace dualfact
