#pragma once

// Model backends behind the extraction, negative-generation, verification and
// grounding stages. Each stage talks to an interface; implementations are
// either remote endpoints (JSON over HTTP) or deterministic mocks.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "dualfact/dataset.hpp"
#include "dualfact/fact.hpp"

namespace dualfact {

enum class BackendKind { Endpoint, Mock };

std::string_view to_string(BackendKind kind);

// Connection settings for a remote backend. The credential itself never
// appears in configuration files; only the name of the variable holding it.
struct EndpointConfig {
  std::string url;  // http://host[:port]/path
  std::chrono::milliseconds timeout{30000};
  std::string token_env;  // empty: no Authorization header
};

// ---- text generation (extraction, negative generation) ----

struct TextRequest {
  std::string template_id;
  std::string rendered_prompt;
  std::string clause_id;
  // In-process context for deterministic mocks; never serialized.
  std::string source_text;
  Layer layer = Layer::Conceptual;
};

// {"template_id","rendered_prompt","clause_id"}
std::string text_request_json(const TextRequest& request);

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string name() const = 0;
  virtual BackendKind kind() const = 0;
  // Returns the raw response text. Throws TransportError.
  virtual std::string complete(const TextRequest& request) = 0;
};

// Scripted responses keyed by clause id. The lookup file is a JSON object;
// keys are tried as "<clause_id>#<template_id>", "<clause_id>#<layer>",
// "<clause_id>". A value is a string or an array of strings served in order
// (the last one repeats). A missing key is a transport failure.
class LookupTextBackend : public TextBackend {
 public:
  LookupTextBackend(std::string name, std::map<std::string, std::vector<std::string>> responses);
  static std::unique_ptr<LookupTextBackend> from_file(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  BackendKind kind() const override { return BackendKind::Mock; }
  std::string complete(const TextRequest& request) override;

 private:
  std::string name_;
  std::map<std::string, std::vector<std::string>> responses_;
  std::map<std::string, std::size_t> served_;
  std::mutex mu_;
};

// Answers every extraction request with the clause's gold positive facts.
class GoldEchoExtractor : public TextBackend {
 public:
  GoldEchoExtractor(const Dataset& dataset, RoleLabels labels = {});

  std::string name() const override { return "gold-echo"; }
  BackendKind kind() const override { return BackendKind::Mock; }
  std::string complete(const TextRequest& request) override;

 private:
  std::map<std::string, std::string> by_key_;
};

// Pattern-based extractor for imperative captions: leading verb, object up
// to the first preposition, "with" -> Tool, "in/on/into/onto/to" ->
// Location. Deterministic and model-free.
class RuleExtractor : public TextBackend {
 public:
  std::string name() const override { return "rule"; }
  BackendKind kind() const override { return BackendKind::Mock; }
  std::string complete(const TextRequest& request) override;
};

// Progressive form used for Action values ("stir" -> "stirring").
std::string gerund(std::string_view verb);

class HttpTextBackend : public TextBackend {
 public:
  HttpTextBackend(std::string name, EndpointConfig config);

  std::string name() const override { return name_; }
  BackendKind kind() const override { return BackendKind::Endpoint; }
  std::string complete(const TextRequest& request) override;

 private:
  std::string name_;
  EndpointConfig config_;
};

// ---- evidence and verification ----

enum class EvidenceMode { Textual, Multimodal };

std::string_view to_string(EvidenceMode mode);
EvidenceMode parse_evidence_mode(std::string_view s);

// A video segment passed by reference. The engine never decodes video; the
// backend samples `frames` uniformly spaced frames itself.
struct SegmentRef {
  std::string video_id;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  int frames = 8;
};

struct Evidence {
  EvidenceMode mode = EvidenceMode::Textual;
  std::string caption;  // textual
  SegmentRef segment;   // multimodal

  static Evidence textual(std::string caption);
  static Evidence multimodal(SegmentRef segment);
  // Throws PreconditionError when the mode-specific field is missing.
  void check() const;
};

struct VerifyRequest {
  Evidence evidence;
  std::string fact_text;
  std::string clause_id;
};

// {"mode","evidence","fact_text","clause_id"}
std::string verify_request_json(const VerifyRequest& request);

class VerifierBackend {
 public:
  virtual ~VerifierBackend() = default;
  virtual std::string name() const = 0;
  virtual BackendKind kind() const = 0;
  virtual bool serves(EvidenceMode mode) const = 0;
  // Returns the raw label text. Throws TransportError.
  virtual std::string judge(const VerifyRequest& request) = 0;
};

// Scripted verdicts. File layout:
//   {"modes": ["textual", "multimodal"],
//    "responses": {"<clause_id>": {"<fact text>": "SUPPORTED" | [..]}},
//    "by_mode": {"multimodal": {"<clause_id>": {...}}},
//    "default": "REFUTED"}
// "by_mode" entries take precedence; "default" is optional and without it a
// missing entry is a transport failure.
class LookupVerifier : public VerifierBackend {
 public:
  using Script = std::map<std::string, std::map<std::string, std::vector<std::string>>>;

  LookupVerifier(std::string name, std::set<EvidenceMode> modes, Script responses,
                 std::map<EvidenceMode, Script> by_mode = {},
                 std::optional<std::string> fallback = std::nullopt);
  static std::unique_ptr<LookupVerifier> from_file(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  BackendKind kind() const override { return BackendKind::Mock; }
  bool serves(EvidenceMode mode) const override { return modes_.count(mode) > 0; }
  std::string judge(const VerifyRequest& request) override;

 private:
  std::string name_;
  std::set<EvidenceMode> modes_;
  Script responses_;
  std::map<EvidenceMode, Script> by_mode_;
  std::optional<std::string> fallback_;
  std::map<std::string, std::size_t> served_;
  std::mutex mu_;
};

// SUPPORTED exactly for the clause's gold positive facts.
class GoldEchoVerifier : public VerifierBackend {
 public:
  explicit GoldEchoVerifier(const Dataset& dataset);

  std::string name() const override { return "gold-echo"; }
  BackendKind kind() const override { return BackendKind::Mock; }
  bool serves(EvidenceMode) const override { return true; }
  std::string judge(const VerifyRequest& request) override;

 private:
  std::map<std::string, std::set<std::string>> positives_;  // clause -> rendered facts
};

class HttpVerifier : public VerifierBackend {
 public:
  HttpVerifier(std::string name, EndpointConfig config, std::set<EvidenceMode> modes);

  std::string name() const override { return name_; }
  BackendKind kind() const override { return BackendKind::Endpoint; }
  bool serves(EvidenceMode mode) const override { return modes_.count(mode) > 0; }
  std::string judge(const VerifyRequest& request) override;

 private:
  std::string name_;
  EndpointConfig config_;
  std::set<EvidenceMode> modes_;
};

// ---- grounding ----

struct GroundingRequest {
  std::string clause_id;
  SegmentRef segment;
  std::string entity;
};

// {"mode":"grounding","evidence":{segment},"fact_text":entity,"clause_id"}
std::string grounding_request_json(const GroundingRequest& request);

class GroundingBackend {
 public:
  virtual ~GroundingBackend() = default;
  virtual std::string name() const = 0;
  virtual BackendKind kind() const = 0;
  // Per-frame visibility of the entity. Throws TransportError.
  virtual std::vector<bool> frames(const GroundingRequest& request) = 0;
};

// Lookup file: {"<clause_id>": {"<entity>": [false, true, ...] | true}}.
// Entities are matched after normalize_entity. Missing entries are
// transport failures.
class LookupGrounder : public GroundingBackend {
 public:
  using Table = std::map<std::string, std::map<std::string, std::vector<bool>>>;

  LookupGrounder(std::string name, Table table);
  static std::unique_ptr<LookupGrounder> from_file(const std::filesystem::path& path);

  std::string name() const override { return name_; }
  BackendKind kind() const override { return BackendKind::Mock; }
  std::vector<bool> frames(const GroundingRequest& request) override;

 private:
  std::string name_;
  Table table_;
};

// Response: {"label_text": "GROUNDED" | "UNGROUNDED", "frames": [bool...]}.
// When "frames" is present it decides; otherwise the label does.
class HttpGrounder : public GroundingBackend {
 public:
  HttpGrounder(std::string name, EndpointConfig config);

  std::string name() const override { return name_; }
  BackendKind kind() const override { return BackendKind::Endpoint; }
  std::vector<bool> frames(const GroundingRequest& request) override;

 private:
  std::string name_;
  EndpointConfig config_;
};

// POSTs a JSON body and returns the response body. Throws TransportError on
// connection failures, timeouts and non-2xx statuses.
std::string http_post_json(const EndpointConfig& config, const std::string& body);

}  // namespace dualfact
