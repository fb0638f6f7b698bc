#pragma once

// End-to-end run: validate, extract, negatives, verify, ground, score,
// decompose, correlate. Configuration is one JSON file; see README.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dualfact/backend.hpp"
#include "dualfact/report.hpp"
#include "dualfact/scoring.hpp"
#include "dualfact/verification.hpp"

namespace dualfact {

// Shipped templates and lexicons. DUALFACT_DATA_DIR overrides the build-time
// location.
std::filesystem::path data_dir();

struct BackendSpec {
  std::string kind;  // "gold-echo" | "rule" | "lookup" | "http"
  std::string file;  // lookup
  std::string url;   // http
  std::string token_env;
  std::int64_t timeout_ms = 30000;
  std::vector<EvidenceMode> modes;  // http verifiers
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // relative paths resolve against this; not hashed

  std::string dataset;
  std::vector<Layer> layers{Layer::Conceptual, Layer::Contextual};
  std::string object_label;  // alias for the Ingredient/Object role, e.g. "Object"
  std::string output_dir = "report";  // not hashed
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;  // not hashed
  bool timestamps = false;

  struct Extraction {
    bool enabled = false;
    BackendSpec backend;
    std::map<Layer, std::string> templates;  // default: shipped extract templates
    bool use_via_caption = false;
    std::string synonyms;
  } extraction;

  struct Negatives {
    bool enabled = false;
    BackendSpec backend;
    std::map<Layer, std::string> templates;
    std::string lexicon;
    std::size_t per_positive = 1;
  } negatives;

  struct Verification {
    BackendSpec backend{"gold-echo", "", "", "", 30000, {}};
    std::vector<EvidenceMode> modes{EvidenceMode::Textual};
    CaptionEvidence caption = CaptionEvidence::Via;
    int frames = 8;
    std::size_t max_transport_failures = 0;
  } verification;

  struct Grounding {
    bool enabled = false;
    BackendSpec backend;
    int frames = 8;
  } grounding;

  struct Decomposition {
    std::vector<EvalMode> modes{EvalMode::CapOnly};
    OmissionMatch match = OmissionMatch::AnyType;
  } decomposition;

  std::string grounding_eval;  // grounding evaluation set
  std::string human;           // annotation export: human scores and annotator pairs

  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(const std::string& text, const std::filesystem::path& base_dir);
  std::string canonical_json() const;
  std::string hash() const;  // 16 hex digits over canonical_json()
  std::filesystem::path resolve(const std::string& p) const;

  // Structural checks that need no backend: files exist, a seed is set for
  // stochastic steps, decomposition modes have the inputs they need.
  // Throws PreconditionError.
  void check() const;
};

std::unique_ptr<TextBackend> make_text_backend(const BackendSpec& spec, const PipelineConfig& config,
                                               const Dataset& dataset);
std::unique_ptr<VerifierBackend> make_verifier(const BackendSpec& spec, const PipelineConfig& config,
                                               const Dataset& dataset);
std::unique_ptr<GroundingBackend> make_grounder(const BackendSpec& spec, const PipelineConfig& config);

// Structural failures (bad config, invalid dataset, an unserved evidence
// mode, an aborted verification batch) throw PreconditionError before any
// backend is called, or mark the returned report as structural when they
// happen mid-run. Per-clause failures become notices and exclusions.
Report run_pipeline(const PipelineConfig& config);

// Individual tables, shared with the CLI subcommands.
Table stats_table(const Dataset& dataset);
Table grounding_eval_table(const GroundingEval& eval, const GroundingCounts& counts);
Table decomposition_table(Layer layer, const std::vector<ErrorDecomposition>& by_mode);

}  // namespace dualfact
