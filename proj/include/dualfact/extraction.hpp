#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualfact/backend.hpp"
#include "dualfact/dataset.hpp"
#include "dualfact/metrics.hpp"
#include "dualfact/ratio.hpp"
#include "dualfact/template.hpp"

namespace dualfact {

struct ExtractionLog {
  std::string clause_id;
  std::vector<std::string> raw_responses;  // one per attempt
  std::vector<std::string> fragments;
  std::size_t duplicates = 0;
  int attempts = 0;
  bool empty_input = false;
  bool transport_failure = false;
  std::optional<std::string> error;  // set when the clause is flagged
};

// Raised after the retry is spent; carries the log for the flagged clause.
class ExtractionError : public Error {
 public:
  explicit ExtractionError(ExtractionLog log)
      : Error("extraction failed for " + log.clause_id + ": " + log.error.value_or("")),
        log_(std::move(log)) {}
  const ExtractionLog& log() const { return log_; }

 private:
  ExtractionLog log_;
};

struct ExtractionResult {
  std::vector<Fact> facts;
  ExtractionLog log;
};

// Renders the template with {{caption}}, calls the backend and parses the
// response. A wholly unparseable response is retried once with the same
// prompt; a second failure throws ExtractionError. TransportError propagates.
ExtractionResult extract_facts(const std::string& caption, Layer layer, TextBackend& backend,
                               const PromptTemplate& tmpl, const std::string& clause_id);

struct ExtractOptions {
  bool use_via_caption = false;
  std::size_t workers = 1;
};

struct ExtractionRun {
  std::map<std::string, std::vector<Fact>> predicted;  // flagged clauses absent
  std::vector<ExtractionLog> logs;                     // dataset order
  std::size_t flagged() const;
};

// Extracts every clause. Per-clause failures (parse or transport) are
// flagged in the log and the run continues.
ExtractionRun extract_dataset(const Dataset& dataset, Layer layer, TextBackend& backend,
                              const PromptTemplate& tmpl, const ExtractOptions& options = {});

// Stores predictions into the clauses' bundles; other clauses keep theirs.
void attach_predictions(Dataset& dataset, Layer layer,
                        const std::map<std::string, std::vector<Fact>>& predicted);

// Optional value merging for slot matching: normalized value -> canonical.
using SynonymTable = std::map<std::string, std::string>;

SynonymTable load_synonyms(const std::filesystem::path& path);

struct SlotMetrics {
  std::vector<std::string> slots;  // slots with any gold or predicted fact, report order
  std::map<std::string, Tally> tallies;
  std::map<std::string, PRF> per_slot;
  Tally micro_tally;
  PRF micro;
  PRF macro;  // unweighted mean over `slots`
};

// Slot-level P/R/F1. Within a clause and slot, facts are compared as sets of
// normalized values (contextual facts compare predicate and argument).
// Throws PreconditionError when the clause sets differ.
SlotMetrics eval_extraction(const std::map<std::string, std::vector<Fact>>& predicted,
                            const std::map<std::string, std::vector<Fact>>& gold, Layer layer,
                            const SynonymTable& synonyms = {});

// Supported/total for one clause's facts, or nullopt when nothing was scored.
using ClauseScorer = std::function<std::optional<Ratio>(const ClauseRecord&, const std::vector<Fact>&)>;

struct SensitivityResult {
  double delta_points = 0;  // mean over videos of |score(F_p) - score(F_g+)| * 100
  std::size_t videos = 0;
  std::size_t excluded_clauses = 0;
  std::map<std::string, double> per_video;
};

SensitivityResult sensitivity_analysis(const Dataset& dataset, Layer layer, const ClauseScorer& score);

}  // namespace dualfact
