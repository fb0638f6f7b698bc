#include "dualfact/verification.hpp"

#include <atomic>
#include <ostream>

#include "dualfact/parallel.hpp"
#include "json.hpp"

namespace dualfact {

GoldLabel assign_gold_label(const Fact& fact, const FactBundle& bundle) {
  if (contains(bundle.positive, fact)) return {Label::Supported, Provenance::PositiveSet};
  if (contains(bundle.negative, fact)) return {Label::Refuted, Provenance::NegativeSet};
  throw PreconditionError("\"" + render(fact) + "\" has no gold label in " + bundle.clause_id);
}

VerifyOutcome verify(const std::vector<VerifyItem>& items, VerifierBackend& backend, const VerifyOptions& options) {
  for (const auto& item : items) {
    if (!backend.serves(item.evidence.mode))
      throw PreconditionError(backend.name() + " does not serve " + std::string(to_string(item.evidence.mode)) +
                              " evidence");
    item.evidence.check();
  }
  struct Slot {
    bool attempted = false;
    std::optional<Verdict> verdict;
    std::optional<Exclusion> exclusion;
  };
  std::vector<Slot> slots(items.size());
  std::atomic<std::size_t> transport_failures{0};
  std::atomic<bool> stop{false};
  parallel_for(items.size(), options.workers, [&](std::size_t i) {
    if (stop.load()) return;
    const auto& item = items[i];
    auto& s = slots[i];
    s.attempted = true;
    try {
      std::string raw = backend.judge({item.evidence, item.fact_text, item.ref.clause_id});
      if (auto label = parse_label(raw)) {
        s.verdict = Verdict{item.ref, *label, backend.name(), item.evidence.mode, raw};
      } else {
        s.exclusion = Exclusion{item.ref, "unparseable verdict", raw, false};
      }
    } catch (const TransportError& e) {
      s.exclusion = Exclusion{item.ref, e.what(), "", true};
      std::size_t n = transport_failures.fetch_add(1) + 1;
      if (options.max_transport_failures > 0 && n >= options.max_transport_failures) stop.store(true);
    }
  });
  VerifyOutcome out;
  for (auto& s : slots) {
    if (!s.attempted) ++out.not_attempted;
    if (s.verdict) out.verdicts.push_back(std::move(*s.verdict));
    if (s.exclusion) out.exclusions.push_back(std::move(*s.exclusion));
  }
  out.aborted = stop.load() || (!items.empty() && transport_failures.load() == items.size());
  return out;
}

namespace {

Evidence evidence_for(const ClauseRecord& c, const ItemOptions& options) {
  if (options.mode == EvidenceMode::Multimodal)
    return Evidence::multimodal({c.video_id, c.start_ms, c.end_ms, options.frames});
  bool via = options.caption == CaptionEvidence::Via && !c.via_caption.empty();
  return Evidence::textual(via ? c.via_caption : c.caption);
}

void add_items(std::vector<VerifyItem>& out, const ClauseRecord& c, FactSource source,
               const std::vector<Fact>& facts, std::size_t& index, const ItemOptions& options) {
  for (const auto& f : facts)
    out.push_back({{c.video_id, c.clause_id, source, index++, f}, evidence_for(c, options), render(f, options.labels)});
}

}  // namespace

std::vector<VerifyItem> gold_items(const Dataset& dataset, Layer layer, const ItemOptions& options) {
  std::vector<VerifyItem> out;
  for (const auto& c : dataset.clauses) {
    std::size_t index = 0;
    add_items(out, c, FactSource::Gold, c.bundle(layer).positive, index, options);
    add_items(out, c, FactSource::Gold, c.bundle(layer).negative, index, options);
  }
  return out;
}

std::vector<VerifyItem> predicted_items(const Dataset& dataset, Layer layer, const ItemOptions& options) {
  std::vector<VerifyItem> out;
  for (const auto& c : dataset.clauses) {
    const auto& b = c.bundle(layer);
    if (!b.predicted) continue;
    std::size_t index = 0;
    add_items(out, c, FactSource::Predicted, *b.predicted, index, options);
  }
  return out;
}

std::vector<LabeledVerdict> label_verdicts(const std::vector<Verdict>& verdicts, const Dataset& dataset) {
  std::vector<LabeledVerdict> out;
  out.reserve(verdicts.size());
  for (const auto& v : verdicts) {
    const auto* c = dataset.find(v.ref.clause_id);
    if (!c) throw PreconditionError("verdict for unknown clause " + v.ref.clause_id);
    auto gold = assign_gold_label(v.ref.fact, c->bundle(layer_of(v.ref.fact)));
    out.push_back({c->video_id, c->clause_id, slot_of(v.ref.fact), v.label, gold.label});
  }
  return out;
}

ClassifierMetrics classifier_metrics(const std::vector<LabeledVerdict>& labeled, Layer layer) {
  ClassifierMetrics m;
  std::map<std::string, GroupMetrics> groups;
  for (const auto& l : labeled) {
    auto& g = groups[l.slot];
    bool pred = l.predicted == Label::Supported;
    bool gold = l.gold == Label::Supported;
    if (pred && gold) ++g.tally.tp;
    if (pred && !gold) ++g.tally.fp;
    if (!pred && gold) ++g.tally.fn;
    if (!pred && !gold) ++g.tn;
  }
  for (const auto& slot : slot_order(layer)) {
    auto it = groups.find(slot);
    if (it == groups.end()) {
      m.omitted.push_back(slot);
      continue;
    }
    auto& g = it->second;
    g.accuracy = {g.tally.tp + g.tn, g.tally.tp + g.tally.fp + g.tally.fn + g.tn};
    g.prf = prf(g.tally);
    m.groups.push_back(slot);
    m.avg_accuracy += g.accuracy.value();
    m.avg.precision += g.prf.precision;
    m.avg.recall += g.prf.recall;
    m.avg.f1 += g.prf.f1;
    m.per_group[slot] = g;
  }
  if (!m.groups.empty()) {
    double n = static_cast<double>(m.groups.size());
    m.avg_accuracy /= n;
    m.avg = {m.avg.precision / n, m.avg.recall / n, m.avg.f1 / n};
  }
  return m;
}

PerVideoAccuracy per_video_accuracy(const std::vector<LabeledVerdict>& labeled, const std::vector<std::string>& videos) {
  PerVideoAccuracy out;
  for (const auto& l : labeled) {
    auto& r = out.within_type[l.video_id][l.slot];
    r.num += l.correct();
    ++r.den;
  }
  for (const auto& [video, types] : out.within_type) {
    double sum = 0;
    for (const auto& [slot, r] : types) sum += r.value();
    out.acc[video] = sum / static_cast<double>(types.size());
    out.mean += out.acc[video];
  }
  if (!out.acc.empty()) out.mean /= static_cast<double>(out.acc.size());
  for (const auto& v : videos) out.excluded_videos += out.acc.count(v) == 0;
  return out;
}

std::size_t export_training(const Dataset& dataset, Layer layer, const ItemOptions& options, std::ostream& out) {
  std::size_t n = 0;
  for (const auto& item : gold_items(dataset, layer, options)) {
    const auto* c = dataset.find(item.ref.clause_id);
    auto gold = assign_gold_label(item.ref.fact, c->bundle(layer));
    nlohmann::ordered_json ref;
    ref["mode"] = to_string(item.evidence.mode);
    ref["clause_id"] = c->clause_id;
    if (item.evidence.mode == EvidenceMode::Textual) {
      ref["caption"] = item.evidence.caption;
    } else {
      ref["video_id"] = item.evidence.segment.video_id;
      ref["start_s"] = static_cast<double>(item.evidence.segment.start_ms) / 1000.0;
      ref["end_s"] = static_cast<double>(item.evidence.segment.end_ms) / 1000.0;
      ref["frames"] = item.evidence.segment.frames;
    }
    nlohmann::ordered_json rec;
    rec["evidence_ref"] = ref;
    rec["fact_text"] = item.fact_text;
    rec["label"] = to_string(gold.label);
    out << rec.dump() << '\n';
    ++n;
  }
  return n;
}

}  // namespace dualfact
