// dualfact command-line tool. Exit codes: 0 success, 1 structural error,
// 2 partial result (per-clause errors or excluded items).

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dualfact/annotation.hpp"
#include "dualfact/extraction.hpp"
#include "dualfact/negatives.hpp"
#include "dualfact/pipeline.hpp"
#include "dualfact/stats.hpp"
#include "json.hpp"

using namespace dualfact;
using nlohmann::json;

namespace {

struct BackendFlags {
  std::string kind;
  std::string file;
  std::string url;
  std::string token_env;
  std::int64_t timeout_ms = 30000;
  std::vector<std::string> modes;

  void add(CLI::App* app, const std::string& name, const std::string& default_kind,
           const std::string& kinds) {
    kind = default_kind;
    app->add_option("--" + name, kind, name + " kind: " + kinds)->capture_default_str();
    app->add_option("--" + name + "-file", file, "lookup file for a lookup " + name);
    app->add_option("--" + name + "-url", url, "endpoint for an http " + name);
    app->add_option("--" + name + "-token-env", token_env, "environment variable holding the bearer token");
    app->add_option("--" + name + "-timeout-ms", timeout_ms, "request timeout")->capture_default_str();
  }

  BackendSpec spec() const {
    BackendSpec s;
    s.kind = kind;
    s.file = file;
    s.url = url;
    s.token_env = token_env;
    s.timeout_ms = timeout_ms;
    for (const auto& m : modes) s.modes.push_back(parse_evidence_mode(m));
    return s;
  }
};

PipelineConfig cwd_config() {
  PipelineConfig c;
  c.base_dir = "";
  return c;
}

std::vector<Layer> layers_of(const std::string& s) {
  if (s == "both") return {Layer::Conceptual, Layer::Contextual};
  return {parse_layer(s)};
}

void print_tables(const std::vector<Table>& tables, bool csv) {
  if (csv) {
    for (const auto& t : tables) std::cout << render_csv(t);
    return;
  }
  Report r;
  r.tables = tables;
  auto text = render_text(r);
  // Drop the report banner line for single-stage output.
  std::cout << text.substr(text.find('\n') + 1);
}

ItemOptions item_options(EvidenceMode mode, const std::string& caption, int frames, const std::string& alias) {
  ItemOptions io;
  io.mode = mode;
  io.caption = caption == "gold" ? CaptionEvidence::Gold : CaptionEvidence::Via;
  io.frames = frames;
  if (!alias.empty()) io.labels = RoleLabels::with_alias(alias);
  return io;
}

// ---- validate ----

int cmd_validate(const std::string& path, bool as_json) {
  auto ds = load_dataset(path);
  auto rep = validate(ds);
  if (as_json) {
    json arr = json::array();
    for (const auto& e : rep.entries)
      arr.push_back({{"clause_id", e.clause_id},
                     {"rule_id", e.rule_id},
                     {"severity", e.severity == Severity::Error ? "error" : "warning"},
                     {"message", e.message}});
    std::cout << arr.dump(2) << "\n";
  } else {
    for (const auto& e : rep.entries)
      std::cout << (e.severity == Severity::Error ? "error" : "warning") << "\t" << e.clause_id << "\t" << e.rule_id
                << "\t" << e.message << "\n";
    std::cout << ds.clauses.size() << " clauses, " << rep.error_count() << " errors, " << rep.warning_count()
              << " warnings\n";
  }
  return rep.error_count() > 0 ? 1 : 0;
}

// ---- extract ----

struct ExtractArgs {
  std::string dataset, layer = "both", out, templ, log, alias;
  bool via = false;
  std::size_t workers = 1;
  BackendFlags backend;
};

int cmd_extract(const ExtractArgs& a) {
  auto ds = load_dataset(a.dataset);
  auto cfg = cwd_config();
  cfg.object_label = a.alias;
  auto backend = make_text_backend(a.backend.spec(), cfg, ds);
  std::size_t flagged = 0;
  std::ofstream log;
  if (!a.log.empty()) log.open(a.log);
  for (auto layer : layers_of(a.layer)) {
    auto path = a.templ.empty() ? data_dir() / "templates" / ("extract_" + std::string(to_string(layer)) + ".json")
                                : std::filesystem::path(a.templ);
    auto tmpl = PromptTemplate::load(path);
    auto run = extract_dataset(ds, layer, *backend, tmpl, ExtractOptions{a.via, a.workers});
    attach_predictions(ds, layer, run.predicted);
    flagged += run.flagged();
    for (const auto& l : run.logs) {
      if (l.error) std::cerr << "flagged " << l.clause_id << " (" << to_string(layer) << "): " << *l.error << "\n";
      if (log)
        log << json{{"clause_id", l.clause_id},   {"layer", to_string(layer)},   {"attempts", l.attempts},
                    {"raw", l.raw_responses},     {"fragments", l.fragments},    {"duplicates", l.duplicates},
                    {"error", l.error ? json(*l.error) : json(nullptr)}}
                   .dump()
            << "\n";
    }
  }
  if (a.out.empty()) write_dataset(ds, std::cout);
  else save_dataset(ds, a.out);
  std::cerr << ds.clauses.size() << " clauses, " << flagged << " flagged\n";
  return flagged ? 2 : 0;
}

// ---- negatives ----

struct NegativesArgs {
  std::string dataset, layer = "both", out, templ, lexicon, alias;
  std::uint64_t seed = 0;
  std::size_t per_positive = 1;
  BackendFlags backend;
};

int cmd_negatives(const NegativesArgs& a) {
  auto ds = load_dataset(a.dataset);
  auto cfg = cwd_config();
  auto backend = make_text_backend(a.backend.spec(), cfg, ds);
  auto lex = ConfusionLexicon::load(a.lexicon);
  int status = 0;
  std::vector<Table> tables;
  for (auto layer : layers_of(a.layer)) {
    auto path = a.templ.empty() ? data_dir() / "templates" / ("negatives_" + std::string(to_string(layer)) + ".json")
                                : std::filesystem::path(a.templ);
    auto tmpl = PromptTemplate::load(path);
    std::map<std::string, std::int64_t> counts;
    for (auto& c : ds.clauses) {
      auto& b = c.bundle(layer);
      if (b.positive.empty()) continue;
      NegativeOptions no;
      no.lexicon = &lex;
      no.seed = a.seed;
      no.per_positive = a.per_positive;
      no.clause_id = c.clause_id;
      if (!a.alias.empty()) no.labels = RoleLabels::with_alias(a.alias);
      try {
        auto run = generate_negatives(b.positive, layer, *backend, tmpl, no);
        b.negative.clear();
        for (const auto& x : run.accepted) {
          b.negative.push_back(x.candidate);
          ++counts["accepted (" + std::string(to_string(x.origin)) + ")"];
        }
        for (const auto& x : run.rejected) ++counts["rejected: " + x.rejection.value_or("?")];
        for (const auto& n : run.notices) std::cerr << c.clause_id << ": " << n << "\n";
      } catch (const LexiconExhausted& e) {
        std::cerr << c.clause_id << ": " << e.what() << "\n";
        status = 2;
      }
    }
    Table t{"negatives_" + std::string(to_string(layer)), "Negative generation (" + std::string(to_string(layer)) + ")",
            {"Outcome", "Count"}, {}};
    for (const auto& [k, n] : counts) t.add({k, n});
    tables.push_back(t);
  }
  if (a.out.empty()) write_dataset(ds, std::cout);
  else save_dataset(ds, a.out);
  if (!a.out.empty()) print_tables(tables, false);
  return status;
}

// ---- verify / score ----

struct VerifyArgs {
  std::string dataset, layer = "conceptual", mode = "textual", facts = "gold", caption = "via", verdicts, training,
                       alias;
  int frames = 8;
  std::size_t workers = 1, max_failures = 0;
  bool csv = false;
  BackendFlags verifier;
};

json verdict_json(const Verdict& v) {
  return {{"video_id", v.ref.video_id},
          {"clause_id", v.ref.clause_id},
          {"source", v.ref.source == FactSource::Gold ? "gold" : "predicted"},
          {"fact_text", render(v.ref.fact)},
          {"label", to_string(v.label)},
          {"mode", to_string(v.mode)},
          {"backend", v.backend}};
}

int cmd_verify(const VerifyArgs& a) {
  auto ds = load_dataset(a.dataset);
  auto layer = parse_layer(a.layer);
  auto mode = parse_evidence_mode(a.mode);
  auto io = item_options(mode, a.caption, a.frames, a.alias);
  if (!a.training.empty()) {
    std::ofstream out(a.training);
    auto n = export_training(ds, layer, io, out);
    std::cerr << n << " training records written\n";
    return 0;
  }
  auto verifier = make_verifier(a.verifier.spec(), cwd_config(), ds);
  auto items = a.facts == "gold" ? gold_items(ds, layer, io) : predicted_items(ds, layer, io);
  auto out = verify(items, *verifier, VerifyOptions{a.workers, a.max_failures});
  for (const auto& e : out.exclusions) std::cerr << "excluded " << e.ref.clause_id << ": " << e.reason << "\n";
  if (!a.verdicts.empty()) {
    std::ofstream vf(a.verdicts);
    for (const auto& v : out.verdicts) vf << verdict_json(v).dump() << "\n";
  }
  std::vector<Table> tables;
  if (a.facts == "gold") {
    auto cm = classifier_metrics(label_verdicts(out.verdicts, ds), layer);
    Table t{"verification", "Verification on gold facts (" + a.layer + ", " + a.mode + ")",
            {"Type", "n", "TP", "FP", "FN", "TN", "Accuracy", "Precision", "Recall", "F1"}, {}};
    for (const auto& g : cm.groups) {
      const auto& m = cm.per_group.at(g);
      t.add({g, m.accuracy.den, m.tally.tp, m.tally.fp, m.tally.fn, m.tn, m.accuracy.percent(),
             format_percent(m.prf.precision), format_percent(m.prf.recall), format_percent(m.prf.f1)});
    }
    if (!cm.groups.empty())
      t.add({std::string("Avg."), std::string("--"), std::string("--"), std::string("--"), std::string("--"),
             std::string("--"), format_percent(cm.avg_accuracy), format_percent(cm.avg.precision),
             format_percent(cm.avg.recall), format_percent(cm.avg.f1)});
    tables.push_back(t);
    auto pva = per_video_accuracy(label_verdicts(out.verdicts, ds), ds.videos());
    Table v{"per_video_accuracy", "Per-video accuracy Acc(v)", {"Video", "Acc(v)"}, {}};
    for (const auto& [vid, acc] : pva.acc) v.add({vid, format_percent(acc)});
    if (!pva.acc.empty()) v.add({std::string("Mean"), format_percent(pva.mean)});
    tables.push_back(v);
  } else {
    std::map<std::string, Ratio> per;
    for (const auto& v : out.verdicts) {
      auto& r = per[slot_of(v.ref.fact)];
      ++r.den;
      if (v.label == Label::Supported) ++r.num;
    }
    Table t{"verification", "Supported share of predicted facts (" + a.layer + ", " + a.mode + ")",
            {"Type", "Supported", "Total", "Percent"}, {}};
    for (const auto& s : slot_order(layer))
      if (auto it = per.find(s); it != per.end()) t.add({s, it->second.num, it->second.den, it->second.percent()});
    tables.push_back(t);
  }
  print_tables(tables, a.csv);
  if (out.aborted) return 1;
  return out.exclusions.empty() && out.not_attempted == 0 ? 0 : 2;
}

int cmd_score(const VerifyArgs& a) {
  auto ds = load_dataset(a.dataset);
  auto layer = parse_layer(a.layer);
  auto io = item_options(parse_evidence_mode(a.mode), a.caption, a.frames, a.alias);
  auto verifier = make_verifier(a.verifier.spec(), cwd_config(), ds);
  auto out = verify(predicted_items(ds, layer, io), *verifier, VerifyOptions{a.workers, a.max_failures});
  auto s = summarize_scores(out.verdicts, ds, layer);
  Table t{"multifactscore", "MultiFactScore (" + a.layer + ", " + a.mode + ")",
          {"Video", "Supported", "Total", "Score"}, {}};
  for (const auto& [vid, r] : s.per_video) t.add({vid, r.num, r.den, r.percent()});
  t.add({std::string("Pooled"), s.pooled.num, s.pooled.den, s.pooled.percent()});
  t.add({std::string("Mean caption"), std::string("--"), std::string("--"),
         s.per_clause.empty() ? std::string("--") : format_percent(s.mean_caption)});
  print_tables({t}, a.csv);
  if (out.aborted) return 1;
  return out.exclusions.empty() && s.skipped_clauses == 0 ? 0 : 2;
}

// ---- decompose ----

struct DecomposeArgs {
  VerifyArgs v;
  std::vector<std::string> eval_modes{"cap_only"};
  std::string omission = "any_type";
  BackendFlags grounder;
};

int cmd_decompose(const DecomposeArgs& a) {
  auto ds = load_dataset(a.v.dataset);
  auto layer = parse_layer(a.v.layer);
  auto verifier = make_verifier(a.v.verifier.spec(), cwd_config(), ds);
  std::vector<EvalMode> modes;
  for (const auto& m : a.eval_modes) modes.push_back(parse_eval_mode(m));
  bool needs_grounding = std::any_of(modes.begin(), modes.end(), [](EvalMode m) { return m != EvalMode::CapOnly; });
  GroundingIndex index;
  std::size_t ungroundable = 0;
  if (needs_grounding) {
    if (a.grounder.kind.empty()) throw PreconditionError("grounded modes need --grounder");
    auto g = make_grounder(a.grounder.spec(), cwd_config());
    auto outcome = ground(grounding_requests(ds, layer, a.v.frames, true), *g, a.v.workers);
    ungroundable = outcome.ungroundable.size();
    index = index_grounding(outcome);
  }
  auto match = a.omission == "same_type" ? OmissionMatch::SameType : OmissionMatch::AnyType;
  std::map<EvidenceMode, std::vector<Verdict>> verdicts;
  std::size_t excluded = 0;
  std::vector<ErrorDecomposition> out;
  for (auto m : modes) {
    auto vm = m == EvalMode::MmGrounded ? EvidenceMode::Multimodal : EvidenceMode::Textual;
    if (!verdicts.count(vm)) {
      if (!verifier->serves(vm))
        throw PreconditionError("verifier does not serve " + std::string(to_string(vm)) + " evidence");
      auto io = item_options(vm, a.v.caption, a.v.frames, a.v.alias);
      auto r = verify(predicted_items(ds, layer, io), *verifier, VerifyOptions{a.v.workers, a.v.max_failures});
      if (r.aborted) throw TransportError("verification aborted after transport failures");
      excluded += r.exclusions.size();
      verdicts[vm] = r.verdicts;
    }
    ErrorDecomposition total;
    total.mode = m;
    for (const auto& cf : clause_facts(verdicts[vm], ds, layer))
      total += decompose_errors(cf, m == EvalMode::CapOnly ? nullptr : &index, m, match);
    out.push_back(total);
  }
  print_tables({decomposition_table(layer, out)}, a.v.csv);
  return excluded || ungroundable ? 2 : 0;
}

// ---- ground-eval / correlate / agreement ----

Ratio parse_count(const std::string& s) {
  auto slash = s.find('/');
  if (slash == std::string::npos) throw FormatError("expected k/n, got '" + s + "'");
  return {std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1))};
}

int cmd_ground_eval(const std::string& set, const std::string& pos, const std::string& neg, bool csv) {
  GroundingCounts counts;
  if (!set.empty()) {
    counts = grounding_counts(load_grounding_set(set));
  } else {
    if (pos.empty() || neg.empty()) throw PreconditionError("give --set, or both --positive and --negative");
    auto p = parse_count(pos), n = parse_count(neg);
    counts = {p.den, p.num, n.den, n.num};
  }
  print_tables({grounding_eval_table(grounding_eval(counts), counts)}, csv);
  return 0;
}

int cmd_correlate(const std::string& pairs_path, const std::string& method) {
  auto pairs = load_paired_scores(pairs_path);
  std::vector<CorrelationMethod> methods;
  if (method == "all") methods = {CorrelationMethod::Pearson, CorrelationMethod::Spearman, CorrelationMethod::Kendall};
  else methods = {parse_correlation_method(method)};
  std::cout << "n\t" << pairs.x.size() << "\ndropped\t" << pairs.dropped << "\n";
  int status = 0;
  for (auto m : methods) {
    try {
      std::cout << to_string(m) << "\t" << format_fixed(correlate(pairs, m), 6) << "\n";
    } catch (const UndefinedMetricError& e) {
      std::cout << to_string(m) << "\t--\t" << e.what() << "\n";
      status = 2;
    }
  }
  return status;
}

int cmd_agreement(const std::string& labels, bool header, const std::string& export_path) {
  std::vector<std::tuple<std::string, std::string, LabelPairs>> pairs;
  if (!export_path.empty()) {
    std::ifstream in(export_path);
    if (!in) throw PreconditionError("cannot open " + export_path);
    auto j = json::parse(in);
    for (const auto& p : j.value("pairs", json::array())) {
      LabelPairs lp;
      lp.a = p.at("labels_a").get<std::vector<std::string>>();
      lp.b = p.at("labels_b").get<std::vector<std::string>>();
      pairs.emplace_back(p.at("a").get<std::string>(), p.at("b").get<std::string>(), lp);
    }
  } else {
    pairs.emplace_back("a", "b", load_label_pairs(labels, header));
  }
  int status = 0;
  for (const auto& [a, b, lp] : pairs) {
    std::cout << a << "\t" << b << "\t" << lp.a.size() << "\t";
    try {
      std::cout << format_fixed(cohen_kappa(lp), 6) << "\n";
    } catch (const Error& e) {
      std::cout << "--\t" << e.what() << "\n";
      status = 2;
    }
  }
  return status;
}

// ---- tasks / serve / export ----

int cmd_tasks(const std::string& dataset, const std::string& spec, std::uint64_t seed, const std::string& frames,
              const std::string& out, const std::string& alias) {
  auto ds = load_dataset(dataset);
  FrameManifest manifest;
  if (!frames.empty()) manifest = FrameManifest::load(frames);
  RoleLabels labels = alias.empty() ? RoleLabels{} : RoleLabels::with_alias(alias);
  auto tasks = build_tasks(ds, TaskSpec::load(spec), seed, manifest, labels);
  save_tasks(tasks, out);
  std::cerr << tasks.size() << " tasks written to " << out << "\n";
  return 0;
}

AnnotationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& tasks_path, const std::string& journal, const std::string& host, int port,
              std::size_t quota, const std::string& frames, const std::string& frames_dir,
              const std::string& static_dir) {
  StoreOptions so;
  so.quota = quota;
  AnnotationStore store(load_tasks(tasks_path), journal, so);
  if (store.recovered_torn_tail()) std::cerr << "journal: dropped a torn final record\n";
  ServerOptions opts;
  if (!frames.empty()) opts.frames = FrameManifest::load(frames);
  opts.frames_dir = frames_dir;
  opts.static_dir = static_dir;
  AnnotationServer server(store, opts);
  int bound = server.bind(host, port);
  std::cerr << "listening on http://" << host << ":" << bound << "\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return 0;
}

int cmd_export(const std::string& tasks_path, const std::string& journal, const std::string& out) {
  AnnotationStore store(load_tasks(tasks_path), journal);
  auto text = export_json(store.export_results());
  if (out.empty()) std::cout << text << "\n";
  else std::ofstream(out) << text << "\n";
  return 0;
}

// ---- run ----

struct RunArgs {
  std::string config, dataset, output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::string> layers, sets, formats{"csv", "records", "text"};
  bool timestamps = false, print = false;
};

json parse_override_value(const std::string& v) {
  auto j = json::parse(v, nullptr, false);
  if (!j.is_discarded()) return j;
  return v;
}

int cmd_run(const RunArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw PreconditionError("cannot open config " + a.config);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(a.config + ": " + e.what());
  }
  for (const auto& s : a.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw FormatError("--set expects key.path=value, got '" + s + "'");
    std::string ptr = "/" + s.substr(0, eq);
    std::replace(ptr.begin(), ptr.end(), '.', '/');
    j[json::json_pointer(ptr)] = parse_override_value(s.substr(eq + 1));
  }
  auto abs = [](const std::string& p) { return std::filesystem::absolute(p).lexically_normal().string(); };
  if (!a.dataset.empty()) j["dataset"] = abs(a.dataset);
  if (!a.output_dir.empty()) j["output_dir"] = abs(a.output_dir);
  if (a.seed) j["seed"] = *a.seed;
  if (a.workers) j["workers"] = *a.workers;
  if (!a.layers.empty()) j["layers"] = a.layers;
  if (a.timestamps) j["timestamps"] = true;

  auto base = std::filesystem::path(a.config).parent_path();
  if (base.empty()) base = ".";
  auto config = PipelineConfig::from_json(j.dump(), base);
  std::vector<ReportFormat> formats;
  for (const auto& f : a.formats) formats.push_back(parse_report_format(f));

  auto report = run_pipeline(config);
  auto written = emit_tables(report, config.resolve(config.output_dir), formats);
  if (a.print) std::cout << render_text(report);
  for (const auto& p : written) std::cerr << "wrote " << p.string() << "\n";
  for (const auto& n : report.notices) std::cerr << "notice: " << n << "\n";
  return report.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualfact: fact-level evaluation of video step captions"};
  app.require_subcommand(1);
  std::function<int()> action;

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "check a dataset against the record rules");
  std::string v_path;
  bool v_json = false;
  validate_cmd->add_option("dataset", v_path, "JSONL dataset")->required();
  validate_cmd->add_flag("--json", v_json, "print entries as JSON");
  validate_cmd->callback([&] { action = [&] { return cmd_validate(v_path, v_json); }; });

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "per-split dataset statistics");
  std::vector<std::string> s_paths;
  bool s_csv = false;
  stats_cmd->add_option("datasets", s_paths, "JSONL datasets")->required();
  stats_cmd->add_flag("--csv", s_csv, "print CSV");
  stats_cmd->callback([&] {
    action = [&] {
      Table all;
      for (const auto& p : s_paths) {
        auto t = stats_table(load_dataset(p));
        if (all.columns.empty()) all = t;
        else for (auto& r : t.rows) all.add(r);
      }
      print_tables({all}, s_csv);
      return 0;
    };
  });

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "extract facts from captions and attach them as predictions");
  ExtractArgs ea;
  extract_cmd->add_option("--dataset", ea.dataset, "JSONL dataset")->required();
  extract_cmd->add_option("--layer", ea.layer, "conceptual, contextual or both")->capture_default_str();
  extract_cmd->add_option("--template", ea.templ, "prompt template (default: shipped template for the layer)");
  extract_cmd->add_option("--out", ea.out, "output dataset (default: stdout)");
  extract_cmd->add_option("--log", ea.log, "per-clause extraction log (JSONL)");
  extract_cmd->add_option("--object-label", ea.alias, "label for the Ingredient/Object role");
  extract_cmd->add_flag("--use-via", ea.via, "extract from the VIA caption instead of the caption");
  extract_cmd->add_option("--workers", ea.workers, "parallel requests")->capture_default_str();
  ea.backend.add(extract_cmd, "backend", "rule", "rule, gold-echo, lookup, http");
  extract_cmd->callback([&] { action = [&] { return cmd_extract(ea); }; });

  // negatives
  auto* neg_cmd = app.add_subcommand("negatives", "generate and filter negative facts");
  NegativesArgs na;
  neg_cmd->add_option("--dataset", na.dataset, "JSONL dataset")->required();
  neg_cmd->add_option("--layer", na.layer, "conceptual, contextual or both")->capture_default_str();
  neg_cmd->add_option("--lexicon", na.lexicon, "confusion lexicon")->required();
  neg_cmd->add_option("--seed", na.seed, "seed for target verbs and fallback substitution")->required();
  neg_cmd->add_option("--per-positive", na.per_positive, "negatives per positive")->capture_default_str();
  neg_cmd->add_option("--template", na.templ, "prompt template");
  neg_cmd->add_option("--object-label", na.alias, "label for the Ingredient/Object role");
  neg_cmd->add_option("--out", na.out, "output dataset (default: stdout)");
  na.backend.add(neg_cmd, "backend", "lookup", "lookup, http");
  neg_cmd->callback([&] { action = [&] { return cmd_negatives(na); }; });

  // verify and score share their flags
  VerifyArgs va, sa;
  auto add_verify_flags = [](CLI::App* cmd, VerifyArgs& a) {
    cmd->add_option("--dataset", a.dataset, "JSONL dataset")->required();
    cmd->add_option("--layer", a.layer, "conceptual or contextual")->capture_default_str();
    cmd->add_option("--mode", a.mode, "textual or multimodal")->capture_default_str();
    cmd->add_option("--caption", a.caption, "textual evidence: via or gold caption")->capture_default_str();
    cmd->add_option("--frames", a.frames, "frames sampled per segment")->capture_default_str();
    cmd->add_option("--workers", a.workers, "parallel requests")->capture_default_str();
    cmd->add_option("--max-transport-failures", a.max_failures, "stop after this many (0: never)")
        ->capture_default_str();
    cmd->add_option("--object-label", a.alias, "label for the Ingredient/Object role");
    cmd->add_flag("--csv", a.csv, "print CSV");
    a.verifier.add(cmd, "verifier", "gold-echo", "gold-echo, lookup, http");
    cmd->add_option("--verifier-modes", a.verifier.modes, "evidence modes an http verifier serves");
  };
  auto* verify_cmd = app.add_subcommand("verify", "verify gold or predicted facts against evidence");
  add_verify_flags(verify_cmd, va);
  verify_cmd->add_option("--facts", va.facts, "gold or predicted")->capture_default_str();
  verify_cmd->add_option("--verdicts", va.verdicts, "write verdicts (JSONL)");
  verify_cmd->add_option("--export-training", va.training, "write verifier training records and exit");
  verify_cmd->callback([&] { action = [&] { return cmd_verify(va); }; });

  auto* score_cmd = app.add_subcommand("score", "MultiFactScore of predicted facts");
  add_verify_flags(score_cmd, sa);
  score_cmd->callback([&] { action = [&] { return cmd_score(sa); }; });

  // decompose
  auto* dec_cmd = app.add_subcommand("decompose", "split errors into omission, hallucination and salience");
  DecomposeArgs da;
  add_verify_flags(dec_cmd, da.v);
  dec_cmd->add_option("--eval-mode", da.eval_modes, "cap_only, text_grounded, mm_grounded (repeatable)")
      ->capture_default_str();
  dec_cmd->add_option("--omission", da.omission, "any_type or same_type")->capture_default_str();
  da.grounder.add(dec_cmd, "grounder", "", "lookup, http");
  dec_cmd->callback([&] { action = [&] { return cmd_decompose(da); }; });

  // ground-eval
  auto* ge_cmd = app.add_subcommand("ground-eval", "grounding recall, specificity and overall accuracy");
  std::string ge_set, ge_pos, ge_neg;
  bool ge_csv = false;
  ge_cmd->add_option("--set", ge_set, "grounding evaluation set (JSON)");
  ge_cmd->add_option("--positive", ge_pos, "grounded/total positive objects, e.g. 4329/7221");
  ge_cmd->add_option("--negative", ge_neg, "ungrounded/total negative objects, e.g. 6524/7878");
  ge_cmd->add_flag("--csv", ge_csv, "print CSV");
  ge_cmd->callback([&] { action = [&] { return cmd_ground_eval(ge_set, ge_pos, ge_neg, ge_csv); }; });

  // correlate
  auto* corr_cmd = app.add_subcommand("correlate", "correlation between paired metric and human scores");
  std::string c_pairs, c_method = "all";
  corr_cmd->add_option("pairs", c_pairs, "two-column file: metric, human")->required();
  corr_cmd->add_option("--method", c_method, "pearson, spearman, kendall or all")->capture_default_str();
  corr_cmd->callback([&] { action = [&] { return cmd_correlate(c_pairs, c_method); }; });

  // agreement
  auto* agr_cmd = app.add_subcommand("agreement", "Cohen's kappa between two annotators");
  std::string g_labels, g_export;
  bool g_header = false;
  agr_cmd->add_option("--labels", g_labels, "two-column label file");
  agr_cmd->add_flag("--header", g_header, "label file has a header line");
  agr_cmd->add_option("--export", g_export, "annotation export (kappa per annotator pair)");
  agr_cmd->callback([&] {
    action = [&] {
      if (g_labels.empty() == g_export.empty()) throw PreconditionError("give exactly one of --labels, --export");
      return cmd_agreement(g_labels, g_header, g_export);
    };
  });

  // tasks
  auto* tasks_cmd = app.add_subcommand("tasks", "sample human judgment tasks from predicted facts");
  std::string t_dataset, t_spec, t_frames, t_out = "tasks.json", t_alias;
  std::uint64_t t_seed = 0;
  tasks_cmd->add_option("--dataset", t_dataset, "dataset with predictions")->required();
  tasks_cmd->add_option("--spec", t_spec, "task counts per mode/layer (JSON)")->required();
  tasks_cmd->add_option("--seed", t_seed, "sampling seed")->required();
  tasks_cmd->add_option("--frames", t_frames, "frame manifest (needed for video tasks)");
  tasks_cmd->add_option("--object-label", t_alias, "label for the Ingredient/Object role");
  tasks_cmd->add_option("--out", t_out, "task file")->capture_default_str();
  tasks_cmd->callback([&] { action = [&] { return cmd_tasks(t_dataset, t_spec, t_seed, t_frames, t_out, t_alias); }; });

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the annotation service");
  std::string sv_tasks, sv_journal = "judgments.jsonl", sv_host = "127.0.0.1", sv_frames, sv_frames_dir = ".",
                        sv_static;
  int sv_port = 8080;
  std::size_t sv_quota = 2;
  serve_cmd->add_option("--tasks", sv_tasks, "task file")->required();
  serve_cmd->add_option("--journal", sv_journal, "judgment journal (JSONL)")->capture_default_str();
  serve_cmd->add_option("--host", sv_host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", sv_port, "port (0: ephemeral)")->capture_default_str();
  serve_cmd->add_option("--quota", sv_quota, "annotators per task (0: unlimited)")->capture_default_str();
  serve_cmd->add_option("--frames", sv_frames, "frame manifest");
  serve_cmd->add_option("--frames-dir", sv_frames_dir, "directory holding frame images")->capture_default_str();
  serve_cmd->add_option("--static", sv_static, "UI assets served at /");
  serve_cmd->callback([&] {
    action = [&] {
      return cmd_serve(sv_tasks, sv_journal, sv_host, sv_port, sv_quota, sv_frames, sv_frames_dir, sv_static);
    };
  });

  // export
  auto* export_cmd = app.add_subcommand("export", "judgment distribution and annotator pairs from a journal");
  std::string x_tasks, x_journal = "judgments.jsonl", x_out;
  export_cmd->add_option("--tasks", x_tasks, "task file")->required();
  export_cmd->add_option("--journal", x_journal, "judgment journal")->capture_default_str();
  export_cmd->add_option("--out", x_out, "output file (default: stdout)");
  export_cmd->callback([&] { action = [&] { return cmd_export(x_tasks, x_journal, x_out); }; });

  // run
  auto* run_cmd = app.add_subcommand("run", "run the configured pipeline and write the report");
  RunArgs ra;
  run_cmd->add_option("--config", ra.config, "pipeline config (JSON)")->required();
  run_cmd->add_option("--dataset", ra.dataset, "override dataset");
  run_cmd->add_option("--output-dir", ra.output_dir, "override output directory");
  run_cmd->add_option("--seed", ra.seed, "override seed");
  run_cmd->add_option("--workers", ra.workers, "override parallelism bound");
  run_cmd->add_option("--layer", ra.layers, "override layers (repeatable)");
  run_cmd->add_option("--set", ra.sets, "override any field: key.path=value (repeatable)");
  run_cmd->add_option("--format", ra.formats, "csv, records, text (repeatable)")->capture_default_str();
  run_cmd->add_flag("--timestamps", ra.timestamps, "record the generation time in the report");
  run_cmd->add_flag("--print", ra.print, "print the text report");
  run_cmd->callback([&] { action = [&] { return cmd_run(ra); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  try {
    return action();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
