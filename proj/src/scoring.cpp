#include "dualfact/scoring.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dualfact/parallel.hpp"
#include "json.hpp"

namespace dualfact {

Ratio multifact_score(const std::vector<Label>& labels) {
  if (labels.empty()) throw UndefinedMetricError("MultiFactScore of an empty fact set");
  Ratio r{0, static_cast<std::int64_t>(labels.size())};
  for (auto l : labels) r.num += l == Label::Supported;
  return r;
}

ScoreSummary summarize_scores(const std::vector<Verdict>& verdicts, const Dataset& dataset, Layer layer) {
  std::map<std::string, std::vector<Label>> by_clause;
  for (const auto& v : verdicts)
    if (v.ref.source == FactSource::Predicted && layer_of(v.ref.fact) == layer)
      by_clause[v.ref.clause_id].push_back(v.label);
  ScoreSummary s;
  double sum = 0;
  for (const auto& c : dataset.clauses) {
    if (!c.bundle(layer).predicted) continue;
    auto it = by_clause.find(c.clause_id);
    if (it == by_clause.end() || it->second.empty()) {
      ++s.skipped_clauses;
      continue;
    }
    Ratio r = multifact_score(it->second);
    s.per_clause[c.clause_id] = r;
    auto& v = s.per_video[c.video_id];
    v.num += r.num;
    v.den += r.den;
    s.pooled.num += r.num;
    s.pooled.den += r.den;
    sum += r.value();
  }
  if (!s.per_clause.empty()) s.mean_caption = sum / static_cast<double>(s.per_clause.size());
  return s;
}

GroundingOutcome ground(const std::vector<GroundingRequest>& requests, GroundingBackend& backend,
                        std::size_t workers) {
  std::vector<std::optional<GroundingResult>> results(requests.size());
  std::vector<std::optional<GroundingFailure>> failures(requests.size());
  parallel_for(requests.size(), workers, [&](std::size_t i) {
    auto r = requests[i];
    std::string entity = normalize_entity(r.entity).value_or(r.entity);
    r.entity = entity;
    try {
      auto frames = backend.frames(r);
      bool any = std::any_of(frames.begin(), frames.end(), [](bool b) { return b; });
      results[i] = GroundingResult{r.clause_id, entity, any, backend.name(), std::move(frames)};
    } catch (const TransportError& e) {
      failures[i] = GroundingFailure{r.clause_id, entity, e.what()};
    }
  });
  GroundingOutcome out;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (results[i]) out.results.push_back(std::move(*results[i]));
    if (failures[i]) out.ungroundable.push_back(std::move(*failures[i]));
  }
  return out;
}

std::vector<GroundingRequest> grounding_requests(const Dataset& dataset, Layer layer, int frames, bool include_gold) {
  std::vector<GroundingRequest> out;
  for (const auto& c : dataset.clauses) {
    std::set<std::string> seen;
    SegmentRef seg{c.video_id, c.start_ms, c.end_ms, frames};
    auto add = [&](const std::vector<Fact>& facts) {
      for (const auto& f : facts)
        if (seen.insert(entity_of(f)).second) out.push_back({c.clause_id, seg, entity_of(f)});
    };
    const auto& b = c.bundle(layer);
    if (b.predicted) add(*b.predicted);
    if (include_gold) add(b.positive);
  }
  return out;
}

GroundingIndex index_grounding(const GroundingOutcome& outcome) {
  GroundingIndex idx;
  for (const auto& r : outcome.results) idx[{r.clause_id, r.entity}] = r.grounded;
  return idx;
}

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::CapOnly: return "cap_only";
    case EvalMode::TextGrounded: return "text_grounded";
    case EvalMode::MmGrounded: return "mm_grounded";
  }
  return "";
}

EvalMode parse_eval_mode(std::string_view s) {
  if (s == "cap_only") return EvalMode::CapOnly;
  if (s == "text_grounded") return EvalMode::TextGrounded;
  if (s == "mm_grounded") return EvalMode::MmGrounded;
  throw FormatError("unknown evaluation mode \"" + std::string(s) + "\"");
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  omission += o.omission;
  hallucination += o.hallucination;
  salience += o.salience;
  ungroundable += o.ungroundable;
  return *this;
}

std::int64_t error_total(const ErrorCounts& c, EvalMode mode) {
  switch (mode) {
    case EvalMode::CapOnly: return c.omission + c.hallucination;
    case EvalMode::TextGrounded: return c.omission + c.hallucination + c.salience;
    case EvalMode::MmGrounded: return c.hallucination + c.salience;
  }
  return 0;
}

Ratio error_share(const ErrorCounts& c, EvalMode mode, std::string_view category) {
  std::int64_t total = error_total(c, mode);
  if (category == "omission") return mode == EvalMode::MmGrounded ? Ratio{c.omission, 0} : Ratio{c.omission, total};
  if (category == "hallucination") return {c.hallucination, total};
  if (category == "salience") return mode == EvalMode::CapOnly ? Ratio{c.salience, 0} : Ratio{c.salience, total};
  throw PreconditionError("unknown error category \"" + std::string(category) + "\"");
}

ErrorDecomposition& ErrorDecomposition::operator+=(const ErrorDecomposition& o) {
  if (mode != o.mode) throw PreconditionError("cannot merge decompositions of different modes");
  for (const auto& [slot, c] : o.per_type) per_type[slot] += c;
  return *this;
}

ErrorDecomposition decompose_errors(const ClauseFacts& clause, const GroundingIndex* grounding, EvalMode mode,
                                    OmissionMatch match) {
  if (mode != EvalMode::CapOnly && !grounding)
    throw PreconditionError(std::string(to_string(mode)) + " decomposition needs grounding results");
  ErrorDecomposition d;
  d.mode = mode;
  for (const auto& [fact, label] : clause.predicted) {
    auto& c = d.per_type[slot_of(fact)];
    if (label != Label::Refuted) continue;
    if (mode == EvalMode::CapOnly) {
      ++c.hallucination;
      continue;
    }
    auto g = grounding->find({clause.clause_id, entity_of(fact)});
    if (g == grounding->end())
      ++c.ungroundable;
    else if (g->second)
      ++c.salience;
    else
      ++c.hallucination;
  }
  for (const auto& gold : clause.gold_positive) {
    auto& c = d.per_type[slot_of(gold)];
    bool expressed = std::any_of(clause.predicted.begin(), clause.predicted.end(), [&](const auto& p) {
      return entity_of(p.first) == entity_of(gold) &&
             (match == OmissionMatch::AnyType || slot_of(p.first) == slot_of(gold));
    });
    if (!expressed) ++c.omission;
  }
  return d;
}

std::vector<ClauseFacts> clause_facts(const std::vector<Verdict>& verdicts, const Dataset& dataset, Layer layer) {
  std::map<std::string, std::vector<const Verdict*>> by_clause;
  for (const auto& v : verdicts)
    if (v.ref.source == FactSource::Predicted && layer_of(v.ref.fact) == layer) by_clause[v.ref.clause_id].push_back(&v);
  std::vector<ClauseFacts> out;
  for (const auto& c : dataset.clauses) {
    const auto& b = c.bundle(layer);
    if (!b.predicted) continue;
    ClauseFacts cf{c.clause_id, {}, b.positive};
    for (const auto* v : by_clause[c.clause_id]) cf.predicted.emplace_back(v->ref.fact, v->label);
    out.push_back(std::move(cf));
  }
  return out;
}

GroundingCounts& GroundingCounts::operator+=(const GroundingCounts& o) {
  positives += o.positives;
  positives_grounded += o.positives_grounded;
  negatives += o.negatives;
  negatives_ungrounded += o.negatives_ungrounded;
  return *this;
}

GroundingCounts grounding_counts(const std::vector<GroundingEvalVideo>& videos) {
  GroundingCounts out;
  for (const auto& v : videos) {
    std::set<std::string> pos(v.positive_objects.begin(), v.positive_objects.end());
    for (const auto& o : v.negative_objects)
      if (pos.count(o)) throw PreconditionError(v.video_id + ": \"" + o + "\" is both a positive and a negative object");
    auto prediction = [&](const std::string& o) {
      auto it = v.predictions.find(o);
      if (it == v.predictions.end()) throw PreconditionError(v.video_id + ": no grounding prediction for \"" + o + "\"");
      return it->second;
    };
    for (const auto& o : v.positive_objects) {
      ++out.positives;
      out.positives_grounded += prediction(o);
    }
    for (const auto& o : v.negative_objects) {
      ++out.negatives;
      out.negatives_ungrounded += !prediction(o);
    }
  }
  return out;
}

GroundingEval grounding_eval(const GroundingCounts& c) {
  return {{c.positives_grounded, c.positives},
          {c.negatives_ungrounded, c.negatives},
          {c.positives_grounded + c.negatives_ungrounded, c.positives + c.negatives}};
}

std::vector<GroundingEvalVideo> load_grounding_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<GroundingEvalVideo> out;
  try {
    auto j = nlohmann::json::parse(in);
    for (const auto& v : j.at("videos")) {
      GroundingEvalVideo g;
      g.video_id = v.at("video_id").get<std::string>();
      auto objects = [&](const char* key) {
        std::vector<std::string> list;
        const auto items = v.value(key, nlohmann::json::array());
        for (const auto& o : items) {
          auto n = normalize_entity(o.get<std::string>());
          if (!n) throw FormatError(path.string() + ": empty object in " + g.video_id);
          list.push_back(*n);
        }
        return list;
      };
      g.positive_objects = objects("positive");
      g.negative_objects = objects("negative");
      const auto predictions = v.value("predictions", nlohmann::json::object());
      for (const auto& [o, b] : predictions.items())
        if (auto n = normalize_entity(o)) g.predictions[*n] = b.get<bool>();
      out.push_back(std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace dualfact
