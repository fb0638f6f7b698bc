#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dualfact/backend.hpp"
#include "dualfact/ratio.hpp"
#include "dualfact/verification.hpp"

namespace dualfact {

// Supported / total. Throws UndefinedMetricError when `labels` is empty.
Ratio multifact_score(const std::vector<Label>& labels);

struct ScoreSummary {
  std::map<std::string, Ratio> per_clause;
  std::map<std::string, Ratio> per_video;  // pooled over the video's clauses
  Ratio pooled;
  double mean_caption = 0;  // mean of per-clause scores
  std::size_t skipped_clauses = 0;  // predicted facts present but none verified
};

// Scores verdicts on predicted facts. `dataset` supplies video ids and the
// clauses that had predictions.
ScoreSummary summarize_scores(const std::vector<Verdict>& verdicts, const Dataset& dataset, Layer layer);

// ---- grounding ----

struct GroundingResult {
  std::string clause_id;
  std::string entity;  // normalized
  bool grounded = false;  // any frame
  std::string backend;
  std::vector<bool> frames;
};

struct GroundingFailure {
  std::string clause_id;
  std::string entity;
  std::string reason;
};

struct GroundingOutcome {
  std::vector<GroundingResult> results;  // request order
  std::vector<GroundingFailure> ungroundable;
};

GroundingOutcome ground(const std::vector<GroundingRequest>& requests, GroundingBackend& backend,
                        std::size_t workers = 1);

// Requests for the entities of the predicted facts, plus the gold positive
// entities when `include_gold` is set; one request per (clause, entity).
std::vector<GroundingRequest> grounding_requests(const Dataset& dataset, Layer layer, int frames = 8,
                                                 bool include_gold = false);

// (clause_id, normalized entity) -> G
using GroundingIndex = std::map<std::pair<std::string, std::string>, bool>;
GroundingIndex index_grounding(const GroundingOutcome& outcome);

// ---- error decomposition ----

enum class EvalMode { CapOnly, TextGrounded, MmGrounded };
std::string_view to_string(EvalMode mode);  // "cap_only", "text_grounded", "mm_grounded"
EvalMode parse_eval_mode(std::string_view s);

enum class OmissionMatch { AnyType, SameType };

struct ErrorCounts {
  std::int64_t omission = 0;
  std::int64_t hallucination = 0;
  std::int64_t salience = 0;
  std::int64_t ungroundable = 0;  // refuted facts without a grounding result

  ErrorCounts& operator+=(const ErrorCounts& o);
  friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

// Denominator of the mode's percentages: omission + hallucination (cap_only),
// all three (text_grounded), hallucination + salience (mm_grounded).
std::int64_t error_total(const ErrorCounts& c, EvalMode mode);
// Percentage of one category in its cell; undefined ("--") for omissions in
// mm_grounded, salience in cap_only, and empty cells.
Ratio error_share(const ErrorCounts& c, EvalMode mode, std::string_view category);

struct ClauseFacts {
  std::string clause_id;
  std::vector<std::pair<Fact, Label>> predicted;  // verified predicted facts
  std::vector<Fact> gold_positive;
};

struct ErrorDecomposition {
  EvalMode mode = EvalMode::CapOnly;
  std::map<std::string, ErrorCounts> per_type;  // slot -> counts
  ErrorDecomposition& operator+=(const ErrorDecomposition& o);
};

// Hallucination: refuted and not grounded (every refuted fact in cap_only).
// Salience: refuted and grounded. Omission: a gold positive whose entity no
// predicted fact expresses. Throws PreconditionError in grounded modes when
// `grounding` is null.
ErrorDecomposition decompose_errors(const ClauseFacts& clause, const GroundingIndex* grounding, EvalMode mode,
                                    OmissionMatch match = OmissionMatch::AnyType);

// Builds per-clause inputs from verdicts on predicted facts.
std::vector<ClauseFacts> clause_facts(const std::vector<Verdict>& verdicts, const Dataset& dataset, Layer layer);

// ---- grounding evaluation ----

struct GroundingCounts {
  std::int64_t positives = 0;
  std::int64_t positives_grounded = 0;
  std::int64_t negatives = 0;
  std::int64_t negatives_ungrounded = 0;

  GroundingCounts& operator+=(const GroundingCounts& o);
};

struct GroundingEvalVideo {
  std::string video_id;
  std::vector<std::string> positive_objects;
  std::vector<std::string> negative_objects;
  std::map<std::string, bool> predictions;  // object -> G
};

// Tallies raw counts. Throws PreconditionError when a video's object sets
// overlap or an object lacks a prediction.
GroundingCounts grounding_counts(const std::vector<GroundingEvalVideo>& videos);

struct GroundingEval {
  Ratio recall_pos;
  Ratio specificity_neg;
  Ratio overall;
};

GroundingEval grounding_eval(const GroundingCounts& counts);

std::vector<GroundingEvalVideo> load_grounding_set(const std::filesystem::path& path);

}  // namespace dualfact
