#include "dualfact/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include "dualfact/annotation.hpp"
#include "dualfact/extraction.hpp"
#include "dualfact/negatives.hpp"
#include "dualfact/stats.hpp"
#include "dualfact/text.hpp"
#include "json.hpp"

#ifndef DUALFACT_DEFAULT_DATA_DIR
#define DUALFACT_DEFAULT_DATA_DIR "data"
#endif

namespace dualfact {

using nlohmann::json;
using nlohmann::ordered_json;

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("DUALFACT_DATA_DIR"); env && *env) return env;
  return DUALFACT_DEFAULT_DATA_DIR;
}

namespace {

std::string_view to_string(OmissionMatch m) { return m == OmissionMatch::AnyType ? "any_type" : "same_type"; }

OmissionMatch parse_omission_match(std::string_view s) {
  if (s == "any_type") return OmissionMatch::AnyType;
  if (s == "same_type") return OmissionMatch::SameType;
  throw FormatError("omission_match must be any_type or same_type");
}

BackendSpec backend_from_json(const json& j) {
  BackendSpec b;
  b.kind = j.value("kind", "");
  b.file = j.value("file", "");
  b.url = j.value("url", "");
  b.token_env = j.value("token_env", "");
  b.timeout_ms = j.value("timeout_ms", std::int64_t{30000});
  if (j.contains("modes"))
    for (const auto& m : j["modes"]) b.modes.push_back(parse_evidence_mode(m.get<std::string>()));
  if (j.contains("token")) throw FormatError("backend credentials belong in the environment; use token_env");
  return b;
}

ordered_json backend_to_json(const BackendSpec& b) {
  ordered_json j = {{"kind", b.kind}};
  if (!b.file.empty()) j["file"] = b.file;
  if (!b.url.empty()) {
    j["url"] = b.url;
    j["token_env"] = b.token_env;
    j["timeout_ms"] = b.timeout_ms;
  }
  if (!b.modes.empty()) {
    j["modes"] = ordered_json::array();
    for (auto m : b.modes) j["modes"].push_back(to_string(m));
  }
  return j;
}

std::map<Layer, std::string> templates_from_json(const json& j) {
  std::map<Layer, std::string> out;
  for (auto& [k, v] : j.items()) out[parse_layer(k)] = v.get<std::string>();
  return out;
}

ordered_json templates_to_json(const std::map<Layer, std::string>& t) {
  ordered_json j = ordered_json::object();
  for (const auto& [l, p] : t) j[std::string(to_string(l))] = p;
  return j;
}

const std::set<std::string> kTopKeys = {"dataset", "layers", "object_label", "output_dir", "seed", "workers",
                                        "timestamps", "extraction", "negatives", "verification", "grounding",
                                        "decomposition", "grounding_eval", "human"};

}  // namespace

PipelineConfig PipelineConfig::from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  for (auto& [k, v] : j.items())
    if (!kTopKeys.count(k)) throw FormatError("config: unknown key '" + k + "'");

  PipelineConfig c;
  c.base_dir = base_dir;
  try {
    c.dataset = j.value("dataset", "");
    if (j.contains("layers")) {
      c.layers.clear();
      for (const auto& l : j["layers"]) c.layers.push_back(parse_layer(l.get<std::string>()));
    }
    c.object_label = j.value("object_label", "");
    c.output_dir = j.value("output_dir", "report");
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    c.workers = j.value("workers", std::size_t{1});
    c.timestamps = j.value("timestamps", false);
    if (j.contains("extraction")) {
      const auto& e = j["extraction"];
      c.extraction.enabled = e.value("enabled", true);
      if (e.contains("backend")) c.extraction.backend = backend_from_json(e["backend"]);
      if (e.contains("templates")) c.extraction.templates = templates_from_json(e["templates"]);
      c.extraction.use_via_caption = e.value("use_via_caption", false);
      c.extraction.synonyms = e.value("synonyms", "");
    }
    if (j.contains("negatives")) {
      const auto& n = j["negatives"];
      c.negatives.enabled = n.value("enabled", true);
      if (n.contains("backend")) c.negatives.backend = backend_from_json(n["backend"]);
      if (n.contains("templates")) c.negatives.templates = templates_from_json(n["templates"]);
      c.negatives.lexicon = n.value("lexicon", "");
      c.negatives.per_positive = n.value("per_positive", std::size_t{1});
    }
    if (j.contains("verification")) {
      const auto& v = j["verification"];
      if (v.contains("backend")) c.verification.backend = backend_from_json(v["backend"]);
      if (v.contains("modes")) {
        c.verification.modes.clear();
        for (const auto& m : v["modes"]) c.verification.modes.push_back(parse_evidence_mode(m.get<std::string>()));
      }
      auto cap = v.value("caption_source", "via");
      if (cap == "via") c.verification.caption = CaptionEvidence::Via;
      else if (cap == "gold") c.verification.caption = CaptionEvidence::Gold;
      else throw FormatError("caption_source must be via or gold");
      c.verification.frames = v.value("frames", 8);
      c.verification.max_transport_failures = v.value("max_transport_failures", std::size_t{0});
    }
    if (j.contains("grounding")) {
      const auto& g = j["grounding"];
      c.grounding.enabled = g.value("enabled", true);
      if (g.contains("backend")) c.grounding.backend = backend_from_json(g["backend"]);
      c.grounding.frames = g.value("frames", 8);
    }
    if (j.contains("decomposition")) {
      const auto& d = j["decomposition"];
      if (d.contains("modes")) {
        c.decomposition.modes.clear();
        for (const auto& m : d["modes"]) c.decomposition.modes.push_back(parse_eval_mode(m.get<std::string>()));
      }
      c.decomposition.match = parse_omission_match(d.value("omission_match", "any_type"));
    }
    c.grounding_eval = j.value("grounding_eval", "");
    c.human = j.value("human", "");
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(ss.str(), base);
}

std::string PipelineConfig::canonical_json() const {
  ordered_json j;
  j["dataset"] = dataset;
  j["layers"] = ordered_json::array();
  for (auto l : layers) j["layers"].push_back(to_string(l));
  j["object_label"] = object_label;
  j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
  j["timestamps"] = timestamps;
  j["extraction"] = {{"enabled", extraction.enabled},
                     {"backend", backend_to_json(extraction.backend)},
                     {"templates", templates_to_json(extraction.templates)},
                     {"use_via_caption", extraction.use_via_caption},
                     {"synonyms", extraction.synonyms}};
  j["negatives"] = {{"enabled", negatives.enabled},
                    {"backend", backend_to_json(negatives.backend)},
                    {"templates", templates_to_json(negatives.templates)},
                    {"lexicon", negatives.lexicon},
                    {"per_positive", negatives.per_positive}};
  ordered_json vmodes = ordered_json::array();
  for (auto m : verification.modes) vmodes.push_back(to_string(m));
  j["verification"] = {{"backend", backend_to_json(verification.backend)},
                       {"modes", vmodes},
                       {"caption_source", verification.caption == CaptionEvidence::Via ? "via" : "gold"},
                       {"frames", verification.frames},
                       {"max_transport_failures", verification.max_transport_failures}};
  j["grounding"] = {{"enabled", grounding.enabled},
                    {"backend", backend_to_json(grounding.backend)},
                    {"frames", grounding.frames}};
  ordered_json dmodes = ordered_json::array();
  for (auto m : decomposition.modes) dmodes.push_back(to_string(m));
  j["decomposition"] = {{"modes", dmodes}, {"omission_match", to_string(decomposition.match)}};
  j["grounding_eval"] = grounding_eval;
  j["human"] = human;
  return j.dump(2);
}

std::string PipelineConfig::hash() const { return text::hex64(text::fnv1a(canonical_json())); }

std::filesystem::path PipelineConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

namespace {

bool has_mode(const std::vector<EvidenceMode>& v, EvidenceMode m) {
  return std::find(v.begin(), v.end(), m) != v.end();
}

void need_file(const PipelineConfig& c, const std::string& p, const std::string& what) {
  if (p.empty()) throw PreconditionError(what + " is not set");
  if (!std::filesystem::exists(c.resolve(p))) throw PreconditionError(what + " not found: " + c.resolve(p).string());
}

void check_backend(const PipelineConfig& c, const BackendSpec& b, const std::string& stage,
                   const std::set<std::string>& kinds) {
  if (!kinds.count(b.kind)) {
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
    throw PreconditionError(stage + " backend kind '" + b.kind + "' is not one of: " + list);
  }
  if (b.kind == "lookup") need_file(c, b.file, stage + " lookup file");
  if (b.kind == "http" && b.url.empty()) throw PreconditionError(stage + " http backend needs a url");
}

}  // namespace

void PipelineConfig::check() const {
  need_file(*this, dataset, "dataset");
  if (layers.empty()) throw PreconditionError("no layers selected");
  if (workers == 0) throw PreconditionError("workers must be at least 1");
  if (extraction.enabled) {
    check_backend(*this, extraction.backend, "extraction", {"gold-echo", "rule", "lookup", "http"});
    for (const auto& [l, p] : extraction.templates) need_file(*this, p, "extraction template");
    if (!extraction.synonyms.empty()) need_file(*this, extraction.synonyms, "synonym table");
  }
  if (negatives.enabled) {
    if (!seed) throw PreconditionError("negative generation is stochastic; set a seed");
    check_backend(*this, negatives.backend, "negatives", {"lookup", "http"});
    need_file(*this, negatives.lexicon, "negatives lexicon");
    for (const auto& [l, p] : negatives.templates) need_file(*this, p, "negatives template");
    if (negatives.per_positive == 0) throw PreconditionError("per_positive must be at least 1");
  }
  check_backend(*this, verification.backend, "verification", {"gold-echo", "lookup", "http"});
  if (verification.modes.empty()) throw PreconditionError("no verification modes selected");
  if (verification.backend.kind == "http" && verification.backend.modes.empty())
    throw PreconditionError("http verifier must list the evidence modes it serves");
  if (grounding.enabled) check_backend(*this, grounding.backend, "grounding", {"lookup", "http"});
  for (auto m : decomposition.modes) {
    auto name = std::string(to_string(m));
    if (m != EvalMode::CapOnly && !grounding.enabled) throw PreconditionError(name + " decomposition needs grounding");
    if (m == EvalMode::MmGrounded && !has_mode(verification.modes, EvidenceMode::Multimodal))
      throw PreconditionError(name + " decomposition needs multimodal verification");
    if (m != EvalMode::MmGrounded && !has_mode(verification.modes, EvidenceMode::Textual))
      throw PreconditionError(name + " decomposition needs textual verification");
  }
  if (!grounding_eval.empty()) need_file(*this, grounding_eval, "grounding evaluation set");
  if (!human.empty()) need_file(*this, human, "human judgment export");
}

std::unique_ptr<TextBackend> make_text_backend(const BackendSpec& spec, const PipelineConfig& config,
                                               const Dataset& dataset) {
  RoleLabels labels = config.object_label.empty() ? RoleLabels{} : RoleLabels::with_alias(config.object_label);
  if (spec.kind == "gold-echo") return std::make_unique<GoldEchoExtractor>(dataset, labels);
  if (spec.kind == "rule") return std::make_unique<RuleExtractor>();
  if (spec.kind == "lookup") return LookupTextBackend::from_file(config.resolve(spec.file));
  if (spec.kind == "http")
    return std::make_unique<HttpTextBackend>(
        "http", EndpointConfig{spec.url, std::chrono::milliseconds(spec.timeout_ms), spec.token_env});
  throw PreconditionError("unknown text backend kind '" + spec.kind + "'");
}

std::unique_ptr<VerifierBackend> make_verifier(const BackendSpec& spec, const PipelineConfig& config,
                                               const Dataset& dataset) {
  if (spec.kind == "gold-echo") return std::make_unique<GoldEchoVerifier>(dataset);
  if (spec.kind == "lookup") return LookupVerifier::from_file(config.resolve(spec.file));
  if (spec.kind == "http")
    return std::make_unique<HttpVerifier>(
        "http", EndpointConfig{spec.url, std::chrono::milliseconds(spec.timeout_ms), spec.token_env},
        std::set<EvidenceMode>(spec.modes.begin(), spec.modes.end()));
  throw PreconditionError("unknown verifier kind '" + spec.kind + "'");
}

std::unique_ptr<GroundingBackend> make_grounder(const BackendSpec& spec, const PipelineConfig& config) {
  if (spec.kind == "lookup") return LookupGrounder::from_file(config.resolve(spec.file));
  if (spec.kind == "http")
    return std::make_unique<HttpGrounder>(
        "http", EndpointConfig{spec.url, std::chrono::milliseconds(spec.timeout_ms), spec.token_env});
  throw PreconditionError("unknown grounder kind '" + spec.kind + "'");
}

// ---- tables ----

namespace {

std::string layer_short(Layer l) { return l == Layer::Conceptual ? "Con" : "Ctx"; }
std::string mode_title(EvidenceMode m) { return m == EvidenceMode::Textual ? "Textual" : "Multimodal"; }

std::string fixed3(double v) { return format_fixed(v, 3); }

std::string file_digest(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text::hex64(text::fnv1a(data));
}

}  // namespace

Table stats_table(const Dataset& dataset) {
  Table t{"stats", "Dataset statistics", {"Dataset", "Split", "Vid.", "Clips", "VIA", "Con.", "Ctx."}, {}};
  auto s = stats(dataset);
  std::string name = dataset.clauses.empty() ? "" : dataset.clauses.front().dataset;
  for (const auto& [split, ss] : s.splits)
    t.add({name, std::string(to_string(split)), ss.videos, ss.clips, ss.via, ss.conceptual, ss.contextual});
  return t;
}

Table grounding_eval_table(const GroundingEval& eval, const GroundingCounts& counts) {
  Table t{"grounding_eval", "Grounding evaluation", {"Subset", "Correct", "Total", "Percent"}, {}};
  t.add({std::string("Positive (recall)"), counts.positives_grounded, counts.positives, eval.recall_pos.percent()});
  t.add({std::string("Negative (specificity)"), counts.negatives_ungrounded, counts.negatives,
         eval.specificity_neg.percent()});
  t.add({std::string("Overall"), eval.overall.num, eval.overall.den, eval.overall.percent()});
  return t;
}

Table decomposition_table(Layer layer, const std::vector<ErrorDecomposition>& by_mode) {
  Table t{"decomposition_" + std::string(to_string(layer)),
          "Error decomposition (" + std::string(to_string(layer)) + ")",
          {"Fact Type", "Eval Mode", "Omission", "Hallucination", "Saliency", "Omission n", "Hallucination n",
           "Saliency n", "Ungroundable n"},
          {}};
  // Types with no error of any kind in any mode are left out.
  std::vector<std::string> types;
  for (const auto& slot : slot_order(layer))
    for (const auto& d : by_mode)
      if (auto it = d.per_type.find(slot); it != d.per_type.end() && it->second != ErrorCounts{}) {
        types.push_back(slot);
        break;
      }
  types.push_back("All");
  for (const auto& type : types) {
    for (const auto& d : by_mode) {
      ErrorCounts c;
      if (type == "All") {
        for (const auto& [slot, counts] : d.per_type) c += counts;
      } else if (auto it = d.per_type.find(type); it != d.per_type.end()) {
        c = it->second;
      }
      t.add({type, std::string(to_string(d.mode)), error_share(c, d.mode, "omission").percent(),
             error_share(c, d.mode, "hallucination").percent(), error_share(c, d.mode, "salience").percent(),
             c.omission, c.hallucination, c.salience, c.ungroundable});
    }
  }
  return t;
}

// ---- run ----

namespace {

struct LayerRun {
  std::map<EvidenceMode, std::vector<Verdict>> predicted;  // verdicts on F_p
  std::map<EvidenceMode, std::vector<Verdict>> gold;       // verdicts on F_g+ and F_g-
};

void add_exclusions(Report& r, const std::string& stage, std::int64_t n) {
  if (n > 0) r.exclusions[stage] += n;
}

}  // namespace

Report run_pipeline(const PipelineConfig& config) {
  config.check();
  Report report;
  report.set_meta("tool", "dualfact " + std::string(kToolVersion));
  report.set_meta("config_hash", config.hash());
  report.set_meta("seed", config.seed ? std::to_string(*config.seed) : "none");
  report.set_meta("dataset", config.dataset);
  auto dataset_path = config.resolve(config.dataset);
  report.set_meta("dataset_digest", file_digest(dataset_path));
  if (config.timestamps) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    report.set_meta("generated_at", buf);
  }

  Dataset dataset = load_dataset(dataset_path);
  auto validation = validate(dataset);
  {
    Table t{"validation", "Dataset validation", {"Clauses", "Errors", "Warnings"}, {}};
    t.add({static_cast<std::int64_t>(dataset.clauses.size()), static_cast<std::int64_t>(validation.error_count()),
           static_cast<std::int64_t>(validation.warning_count())});
    report.tables.push_back(t);
  }
  for (const auto& e : validation.entries)
    if (e.severity == Severity::Error) report.notices.push_back("validate " + e.clause_id + " " + e.rule_id + ": " + e.message);
  if (validation.error_count() > 0) {
    report.structural_error = true;
    return report;
  }
  report.tables.push_back(stats_table(dataset));

  RoleLabels labels = config.object_label.empty() ? RoleLabels{} : RoleLabels::with_alias(config.object_label);
  const std::size_t workers = config.workers;

  // Backends are built up front so that an unserved mode fails before any call.
  auto verifier = make_verifier(config.verification.backend, config, dataset);
  for (auto m : config.verification.modes)
    if (!verifier->serves(m))
      throw PreconditionError("verifier " + verifier->name() + " does not serve " + std::string(to_string(m)) +
                              " evidence");
  std::unique_ptr<TextBackend> extractor;
  if (config.extraction.enabled) extractor = make_text_backend(config.extraction.backend, config, dataset);
  std::unique_ptr<TextBackend> negative_backend;
  std::optional<ConfusionLexicon> lexicon;
  if (config.negatives.enabled) {
    negative_backend = make_text_backend(config.negatives.backend, config, dataset);
    lexicon = ConfusionLexicon::load(config.resolve(config.negatives.lexicon));
  }
  std::unique_ptr<GroundingBackend> grounder;
  if (config.grounding.enabled) grounder = make_grounder(config.grounding.backend, config);

  auto template_path = [&](const std::map<Layer, std::string>& configured, Layer l, const std::string& stem) {
    auto it = configured.find(l);
    if (it != configured.end()) return config.resolve(it->second);
    return data_dir() / "templates" / (stem + "_" + std::string(to_string(l)) + ".json");
  };

  std::map<Layer, LayerRun> runs;
  for (auto layer : config.layers) {
    const std::string lname(to_string(layer));

    if (extractor) {
      auto tmpl = PromptTemplate::load(template_path(config.extraction.templates, layer, "extract"));
      report.set_meta("template_extract_" + lname, tmpl.template_id);
      ExtractOptions eo;
      eo.use_via_caption = config.extraction.use_via_caption;
      eo.workers = workers;
      auto run = extract_dataset(dataset, layer, *extractor, tmpl, eo);
      for (const auto& log : run.logs)
        if (log.error) report.notices.push_back("extract " + lname + " " + log.clause_id + ": " + *log.error);
      add_exclusions(report, "extraction/" + lname, static_cast<std::int64_t>(run.flagged()));
      attach_predictions(dataset, layer, run.predicted);
    }

    // Slot metrics of predictions against the gold positives.
    {
      std::map<std::string, std::vector<Fact>> pred, gold;
      for (const auto& c : dataset.clauses) {
        const auto& b = c.bundle(layer);
        if (!b.predicted && !extractor) continue;
        pred[c.clause_id] = b.predicted.value_or(std::vector<Fact>{});
        gold[c.clause_id] = b.positive;
      }
      if (!pred.empty()) {
        SynonymTable syn;
        if (!config.extraction.synonyms.empty()) syn = load_synonyms(config.resolve(config.extraction.synonyms));
        auto m = eval_extraction(pred, gold, layer, syn);
        Table t{"extraction_" + lname, "Extraction against gold positives (" + lname + ")",
                {"Slot", "TP", "FP", "FN", "Precision", "Recall", "F1"}, {}};
        for (const auto& slot : m.slots) {
          const auto& tl = m.tallies.at(slot);
          const auto& p = m.per_slot.at(slot);
          t.add({slot, tl.tp, tl.fp, tl.fn, format_percent(p.precision), format_percent(p.recall),
                 format_percent(p.f1)});
        }
        t.add({std::string("Micro"), m.micro_tally.tp, m.micro_tally.fp, m.micro_tally.fn,
               format_percent(m.micro.precision), format_percent(m.micro.recall), format_percent(m.micro.f1)});
        t.add({std::string("Macro"), std::string("--"), std::string("--"), std::string("--"),
               format_percent(m.macro.precision), format_percent(m.macro.recall), format_percent(m.macro.f1)});
        report.tables.push_back(t);
      }
    }

    if (negative_backend) {
      auto tmpl = PromptTemplate::load(template_path(config.negatives.templates, layer, "negatives"));
      report.set_meta("template_negatives_" + lname, tmpl.template_id);
      std::int64_t from_backend = 0, from_fallback = 0, fallback_clauses = 0;
      std::map<std::string, std::int64_t> rejected;
      for (auto& c : dataset.clauses) {
        auto& b = c.bundle(layer);
        if (b.positive.empty()) continue;
        NegativeOptions no;
        no.lexicon = &*lexicon;
        no.seed = *config.seed;
        no.per_positive = config.negatives.per_positive;
        no.labels = labels;
        no.clause_id = c.clause_id;
        try {
          auto run = generate_negatives(b.positive, layer, *negative_backend, tmpl, no);
          std::vector<Fact> negs;
          for (const auto& a : run.accepted) {
            negs.push_back(a.candidate);
            ++(a.origin == Origin::Backend ? from_backend : from_fallback);
          }
          for (const auto& r : run.rejected) ++rejected[r.rejection.value_or("?")];
          if (!run.notices.empty()) ++fallback_clauses;
          b.negative = std::move(negs);
        } catch (const LexiconExhausted& e) {
          report.notices.push_back("negatives " + lname + " " + c.clause_id + ": " + e.what());
        }
      }
      Table t{"negatives_" + lname, "Negative generation (" + lname + ")", {"Outcome", "Count"}, {}};
      t.add({std::string("accepted (backend)"), from_backend});
      t.add({std::string("accepted (fallback)"), from_fallback});
      t.add({std::string("clauses with fallback"), fallback_clauses});
      for (const auto& [rule, n] : rejected) t.add({"rejected: " + rule, n});
      report.tables.push_back(t);
    }

    // Verification: gold sets (classifier view) and predicted facts (score view).
    Table acc{"verification_" + lname, "Fact-level verification accuracy (" + lname + ")", {"Mode", "Inputs"}, {}};
    const auto slots = slot_order(layer);
    for (const auto& s : slots) acc.columns.push_back(s);
    acc.columns.push_back("Avg.");
    Table detail{"verification_" + lname + "_counts", "Verification counts on gold facts (" + lname + ")",
                 {"Mode", "Type", "n", "TP", "FP", "FN", "TN", "Accuracy", "Precision", "Recall", "F1"}, {}};
    Table video{"per_video_accuracy_" + lname, "Per-video accuracy Acc(v) (" + lname + ")",
                {"Mode", "Videos", "Mean Acc(v)", "Excluded videos"}, {}};

    for (auto mode : config.verification.modes) {
      const std::string mname(to_string(mode));
      ItemOptions io;
      io.mode = mode;
      io.caption = config.verification.caption;
      io.frames = config.verification.frames;
      io.labels = labels;
      VerifyOptions vo{workers, config.verification.max_transport_failures};

      auto gold_out = verify(gold_items(dataset, layer, io), *verifier, vo);
      add_exclusions(report, "verification/" + lname + "/" + mname + "/gold",
                     static_cast<std::int64_t>(gold_out.exclusions.size() + gold_out.not_attempted));
      for (const auto& e : gold_out.exclusions)
        report.notices.push_back("verify " + lname + " " + mname + " " + e.ref.clause_id + ": " + e.reason);
      if (gold_out.aborted) {
        report.notices.push_back("verify " + lname + " " + mname + ": batch aborted after transport failures");
        report.structural_error = true;
        return report;
      }
      auto labeled = label_verdicts(gold_out.verdicts, dataset);
      runs[layer].gold[mode] = gold_out.verdicts;
      auto cm = classifier_metrics(labeled, layer);
      std::vector<Cell> row{mode_title(mode), std::string("F_g+, F_g-")};
      for (const auto& s : slots) {
        auto it = cm.per_group.find(s);
        row.push_back(it == cm.per_group.end() ? std::string("--") : it->second.accuracy.percent());
      }
      row.push_back(cm.groups.empty() ? std::string("--") : format_percent(cm.avg_accuracy));
      acc.add(row);
      for (const auto& g : cm.groups) {
        const auto& gm = cm.per_group.at(g);
        detail.add({mode_title(mode), g, gm.accuracy.den, gm.tally.tp, gm.tally.fp, gm.tally.fn, gm.tn,
                    gm.accuracy.percent(), format_percent(gm.prf.precision), format_percent(gm.prf.recall),
                    format_percent(gm.prf.f1)});
      }
      if (!cm.groups.empty())
        detail.add({mode_title(mode), std::string("Avg."), std::string("--"), std::string("--"), std::string("--"),
                    std::string("--"), std::string("--"), format_percent(cm.avg_accuracy),
                    format_percent(cm.avg.precision), format_percent(cm.avg.recall), format_percent(cm.avg.f1)});
      auto pva = per_video_accuracy(labeled, dataset.videos());
      video.add({mode_title(mode), static_cast<std::int64_t>(pva.acc.size()),
                 pva.acc.empty() ? std::string("--") : format_percent(pva.mean),
                 static_cast<std::int64_t>(pva.excluded_videos)});

      auto pred_items = predicted_items(dataset, layer, io);
      if (pred_items.empty()) continue;
      auto pred_out = verify(pred_items, *verifier, vo);
      add_exclusions(report, "verification/" + lname + "/" + mname + "/predicted",
                     static_cast<std::int64_t>(pred_out.exclusions.size() + pred_out.not_attempted));
      for (const auto& e : pred_out.exclusions)
        report.notices.push_back("verify " + lname + " " + mname + " " + e.ref.clause_id + ": " + e.reason);
      if (pred_out.aborted) {
        report.notices.push_back("verify " + lname + " " + mname + ": batch aborted after transport failures");
        report.structural_error = true;
        return report;
      }
      std::map<std::string, Ratio> per_slot;
      for (const auto& v : pred_out.verdicts) {
        auto& r = per_slot[slot_of(v.ref.fact)];
        ++r.den;
        if (v.label == Label::Supported) ++r.num;
      }
      std::vector<Cell> prow{mode_title(mode), std::string("F_p")};
      double sum = 0;
      int present = 0;
      for (const auto& s : slots) {
        auto it = per_slot.find(s);
        if (it == per_slot.end() || !it->second.defined()) {
          prow.push_back(std::string("--"));
          continue;
        }
        prow.push_back(it->second.percent());
        sum += it->second.value();
        ++present;
      }
      prow.push_back(present ? format_percent(sum / present) : std::string("--"));
      acc.add(prow);
      runs[layer].predicted[mode] = std::move(pred_out.verdicts);
    }
    report.tables.push_back(acc);
    report.tables.push_back(detail);
    report.tables.push_back(video);

    // MultiFactScore of the gold positives and of the predictions.
    Table score{"multifactscore_" + lname, "MultiFactScore (" + lname + ")",
                {"Mode", "Facts", "Supported", "Total", "Pooled", "Mean caption", "Skipped clauses"}, {}};
    for (auto mode : config.verification.modes) {
      auto it = runs[layer].predicted.find(mode);
      if (it == runs[layer].predicted.end()) continue;
      auto s = summarize_scores(it->second, dataset, layer);
      score.add({mode_title(mode), std::string("F_p"), s.pooled.num, s.pooled.den, s.pooled.percent(),
                 s.per_clause.empty() ? std::string("--") : format_percent(s.mean_caption),
                 static_cast<std::int64_t>(s.skipped_clauses)});
    }
    // Gold positives under the same verifier, as a reference row.
    for (auto mode : config.verification.modes) {
      std::vector<Label> ls;
      for (const auto& v : runs[layer].gold[mode])
        if (contains(dataset.find(v.ref.clause_id)->bundle(layer).positive, v.ref.fact)) ls.push_back(v.label);
      if (ls.empty()) continue;
      auto r = multifact_score(ls);
      score.add({mode_title(mode), std::string("F_g+"), r.num, r.den, r.percent(), std::string("--"),
                 std::int64_t{0}});
    }
    report.tables.push_back(score);

    // Grounding of predicted and gold entities, then the error decomposition.
    GroundingIndex gindex;
    if (grounder) {
      auto outcome = ground(grounding_requests(dataset, layer, config.grounding.frames, true), *grounder, workers);
      add_exclusions(report, "grounding/" + lname, static_cast<std::int64_t>(outcome.ungroundable.size()));
      for (const auto& f : outcome.ungroundable)
        report.notices.push_back("ground " + lname + " " + f.clause_id + " '" + f.entity + "': " + f.reason);
      gindex = index_grounding(outcome);
    }
    std::vector<ErrorDecomposition> decomps;
    for (auto m : config.decomposition.modes) {
      auto vmode = m == EvalMode::MmGrounded ? EvidenceMode::Multimodal : EvidenceMode::Textual;
      auto it = runs[layer].predicted.find(vmode);
      if (it == runs[layer].predicted.end()) continue;
      ErrorDecomposition total;
      total.mode = m;
      for (const auto& cf : clause_facts(it->second, dataset, layer))
        total += decompose_errors(cf, m == EvalMode::CapOnly ? nullptr : &gindex, m, config.decomposition.match);
      decomps.push_back(total);
    }
    if (!decomps.empty()) report.tables.push_back(decomposition_table(layer, decomps));
  }

  if (!config.grounding_eval.empty()) {
    auto set = load_grounding_set(config.resolve(config.grounding_eval));
    auto counts = grounding_counts(set);
    report.tables.push_back(grounding_eval_table(grounding_eval(counts), counts));
  }

  if (!config.human.empty()) {
    auto human_path = config.resolve(config.human);
    auto human = load_human_scores(human_path);
    Table corr{"correlation", "Correlation with human judgments",
               {"Method", "Videos", "Dropped", "Pearson r", "Spearman rho", "Kendall tau"}, {}};
    for (auto mode : {EvidenceMode::Textual, EvidenceMode::Multimodal}) {
      for (auto layer : config.layers) {
        auto jm = mode == EvidenceMode::Textual ? JudgmentMode::Caption : JudgmentMode::Video;
        auto hit = human.find(stratum_name(jm, layer));
        auto rit = runs[layer].predicted.find(mode);
        if (hit == human.end() || rit == runs[layer].predicted.end()) continue;
        auto s = summarize_scores(rit->second, dataset, layer);
        std::map<std::string, double> metric;
        for (const auto& [v, r] : s.per_video)
          if (r.defined()) metric[v] = r.value();
        std::map<std::string, std::optional<double>> hs;
        for (const auto& [v, x] : hit->second) hs[v] = x;
        auto pairs = PairedScores::align(metric, hs);
        std::vector<Cell> row{std::string(jm == JudgmentMode::Caption ? "Caption" : "Video") + " (" +
                                  layer_short(layer) + ")",
                              static_cast<std::int64_t>(pairs.x.size()), static_cast<std::int64_t>(pairs.dropped)};
        for (auto method : {CorrelationMethod::Pearson, CorrelationMethod::Spearman, CorrelationMethod::Kendall}) {
          try {
            row.push_back(fixed3(correlate(pairs, method)));
          } catch (const Error&) {
            row.push_back(std::string("--"));
          }
        }
        corr.add(row);
      }
    }
    report.tables.push_back(corr);

    std::ifstream in(human_path);
    json j = json::parse(in);
    Table agree{"agreement", "Inter-annotator agreement", {"Annotator A", "Annotator B", "Items", "Cohen kappa"}, {}};
    for (const auto& p : j.value("pairs", json::array())) {
      LabelPairs lp;
      lp.a = p.at("labels_a").get<std::vector<std::string>>();
      lp.b = p.at("labels_b").get<std::vector<std::string>>();
      std::string k = "--";
      try {
        k = fixed3(cohen_kappa(lp));
      } catch (const Error&) {
      }
      agree.add({p.at("a").get<std::string>(), p.at("b").get<std::string>(), static_cast<std::int64_t>(lp.a.size()), k});
    }
    report.tables.push_back(agree);
  }
  return report;
}

}  // namespace dualfact
