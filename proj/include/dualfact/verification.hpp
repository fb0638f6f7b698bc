#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualfact/backend.hpp"
#include "dualfact/dataset.hpp"
#include "dualfact/metrics.hpp"
#include "dualfact/ratio.hpp"

namespace dualfact {

enum class Provenance { PositiveSet, NegativeSet };

struct GoldLabel {
  Label label = Label::Refuted;
  Provenance provenance = Provenance::NegativeSet;
};

// SUPPORTED iff the fact is a gold positive. Throws PreconditionError when the
// fact is in neither gold set.
GoldLabel assign_gold_label(const Fact& fact, const FactBundle& bundle);

enum class FactSource { Gold, Predicted };

struct FactRef {
  std::string video_id;
  std::string clause_id;
  FactSource source = FactSource::Gold;
  std::size_t index = 0;  // position in the clause's item list
  Fact fact;
};

struct VerifyItem {
  FactRef ref;
  Evidence evidence;
  std::string fact_text;
};

struct Verdict {
  FactRef ref;
  Label label = Label::Refuted;
  std::string backend;
  EvidenceMode mode = EvidenceMode::Textual;
  std::string raw;
};

struct Exclusion {
  FactRef ref;
  std::string reason;
  std::string raw;
  bool transport = false;
};

struct VerifyOptions {
  std::size_t workers = 1;
  // Stop issuing requests after this many transport failures (0: never).
  // Every item failing also counts as an aborted batch.
  std::size_t max_transport_failures = 0;
};

struct VerifyOutcome {
  std::vector<Verdict> verdicts;      // item order
  std::vector<Exclusion> exclusions;  // item order
  std::size_t not_attempted = 0;
  bool aborted = false;
};

// One verdict per item whose response parses as SUPPORTED or REFUTED; every
// other item yields an exclusion record. Throws PreconditionError when the
// backend does not serve an item's evidence mode.
VerifyOutcome verify(const std::vector<VerifyItem>& items, VerifierBackend& backend,
                     const VerifyOptions& options = {});

enum class CaptionEvidence { Via, Gold };

struct ItemOptions {
  EvidenceMode mode = EvidenceMode::Textual;
  CaptionEvidence caption = CaptionEvidence::Via;
  int frames = 8;
  RoleLabels labels;
};

// Items for the gold positives and negatives of every clause.
std::vector<VerifyItem> gold_items(const Dataset& dataset, Layer layer, const ItemOptions& options = {});
// Items for the predicted facts; clauses without predictions are skipped.
std::vector<VerifyItem> predicted_items(const Dataset& dataset, Layer layer, const ItemOptions& options = {});

struct LabeledVerdict {
  std::string video_id;
  std::string clause_id;
  std::string slot;
  Label predicted = Label::Refuted;
  Label gold = Label::Refuted;
  bool correct() const { return predicted == gold; }
};

// Attaches gold labels to verdicts on gold facts. Throws PreconditionError
// when a verdict has no gold label.
std::vector<LabeledVerdict> label_verdicts(const std::vector<Verdict>& verdicts, const Dataset& dataset);

struct GroupMetrics {
  Tally tally;  // SUPPORTED is the positive class
  std::int64_t tn = 0;
  Ratio accuracy;
  PRF prf;
};

struct ClassifierMetrics {
  std::vector<std::string> groups;  // report order, non-empty groups only
  std::map<std::string, GroupMetrics> per_group;
  std::vector<std::string> omitted;  // slots of the layer with no verdicts
  double avg_accuracy = 0;           // unweighted means over `groups`
  PRF avg;
};

ClassifierMetrics classifier_metrics(const std::vector<LabeledVerdict>& labeled, Layer layer);

struct PerVideoAccuracy {
  std::map<std::string, double> acc;                                // Acc(v)
  std::map<std::string, std::map<std::string, Ratio>> within_type;  // video -> slot -> correct/n
  double mean = 0;
  std::size_t excluded_videos = 0;  // listed videos with no labeled facts
};

// Acc(v) is the unweighted mean over the fact types present in v of the
// within-type accuracy; the mean is over videos with any labeled fact.
PerVideoAccuracy per_video_accuracy(const std::vector<LabeledVerdict>& labeled,
                                    const std::vector<std::string>& videos = {});

// Verifier training records, one JSON object per line:
// {"evidence_ref": {...}, "fact_text": "...", "label": "SUPPORTED"|"REFUTED"}
std::size_t export_training(const Dataset& dataset, Layer layer, const ItemOptions& options, std::ostream& out);

}  // namespace dualfact
