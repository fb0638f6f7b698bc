#include "dualfact/backend.hpp"

#include <cstdlib>
#include <fstream>

#include "dualfact/metrics.hpp"
#include "dualfact/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dualfact {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> string_or_list(const json& v, const std::string& where) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_array() && !v.empty()) {
    for (const auto& s : v) {
      if (!s.is_string()) throw FormatError(where + ": responses must be strings");
      out.push_back(s.get<std::string>());
    }
  } else {
    throw FormatError(where + ": expected a string or a nonempty list of strings");
  }
  return out;
}

// Serves scripted responses in order, repeating the last one.
std::string next_scripted(std::map<std::string, std::size_t>& served, const std::string& key,
                          const std::vector<std::string>& script) {
  std::size_t& i = served[key];
  const std::string& out = script[std::min(i, script.size() - 1)];
  ++i;
  return out;
}

ordered_json segment_json(const SegmentRef& s) {
  ordered_json out;
  out["video_id"] = s.video_id;
  out["start_s"] = static_cast<double>(s.start_ms) / 1000.0;
  out["end_s"] = static_cast<double>(s.end_ms) / 1000.0;
  out["frames"] = s.frames;
  return out;
}

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("endpoint URL lacks a scheme: " + url);
  if (url.compare(0, scheme_end, "http") != 0)
    throw PreconditionError("only http:// endpoints are supported: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

const std::set<std::string> kDeterminers = {"the", "a", "an", "some", "your", "its", "their", "this", "that"};
const std::set<std::string> kPronouns = {"it", "them", "there", "this", "that", "these", "those"};
const std::map<std::string, std::string> kPrepositions = {
    {"with", "with"}, {"in", "in"}, {"into", "in"}, {"on", "on"}, {"onto", "on"}, {"to", "to"}};

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Mock ? "mock" : "endpoint"; }

std::string text_request_json(const TextRequest& request) {
  ordered_json out;
  out["template_id"] = request.template_id;
  out["rendered_prompt"] = request.rendered_prompt;
  out["clause_id"] = request.clause_id;
  return out.dump();
}

LookupTextBackend::LookupTextBackend(std::string name,
                                     std::map<std::string, std::vector<std::string>> responses)
    : name_(std::move(name)), responses_(std::move(responses)) {}

std::unique_ptr<LookupTextBackend> LookupTextBackend::from_file(const std::filesystem::path& path) {
  json j = read_json_file(path);
  if (!j.is_object()) throw FormatError(path.string() + ": expected an object keyed by clause id");
  std::map<std::string, std::vector<std::string>> responses;
  for (const auto& [key, value] : j.items()) responses[key] = string_or_list(value, path.string() + ":" + key);
  return std::make_unique<LookupTextBackend>("lookup:" + path.filename().string(), std::move(responses));
}

std::string LookupTextBackend::complete(const TextRequest& request) {
  const std::string keys[] = {request.clause_id + "#" + request.template_id,
                              request.clause_id + "#" + std::string(to_string(request.layer)),
                              request.clause_id};
  std::lock_guard<std::mutex> lock(mu_);
  for (const auto& key : keys) {
    auto it = responses_.find(key);
    if (it != responses_.end()) return next_scripted(served_, key, it->second);
  }
  throw TransportError(name_ + ": no scripted response for clause " + request.clause_id);
}

GoldEchoExtractor::GoldEchoExtractor(const Dataset& dataset, RoleLabels labels) {
  for (const auto& c : dataset.clauses) {
    for (auto layer : kLayers) {
      std::vector<std::string> rendered;
      for (const auto& f : c.bundle(layer).positive) rendered.push_back(render(f, labels));
      by_key_[c.clause_id + "#" + std::string(to_string(layer))] = text::join(rendered, ", ");
    }
  }
}

std::string GoldEchoExtractor::complete(const TextRequest& request) {
  auto it = by_key_.find(request.clause_id + "#" + std::string(to_string(request.layer)));
  if (it == by_key_.end()) throw TransportError("gold-echo: unknown clause " + request.clause_id);
  return it->second;
}

std::string gerund(std::string_view verb_in) {
  std::string v = text::to_lower(text::trim(verb_in));
  if (v.size() < 2) return v + "ing";
  auto ends = [&](std::string_view s) { return v.size() >= s.size() && v.compare(v.size() - s.size(), s.size(), s) == 0; };
  if (ends("ie")) return v.substr(0, v.size() - 2) + "ying";
  if (ends("e") && !ends("ee") && !ends("ye") && !ends("oe")) return v.substr(0, v.size() - 1) + "ing";
  int vowel_groups = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (is_vowel(v[i]) && (i == 0 || !is_vowel(v[i - 1]))) ++vowel_groups;
  std::size_t n = v.size();
  char last = v[n - 1];
  bool cvc = n >= 3 && !is_vowel(last) && last != 'w' && last != 'x' && last != 'y' &&
             is_vowel(v[n - 2]) && !is_vowel(v[n - 3]);
  if (cvc && vowel_groups == 1) return v + last + "ing";
  return v + "ing";
}

std::string RuleExtractor::complete(const TextRequest& request) {
  auto tokens = text::word_tokens(request.source_text);
  if (tokens.empty()) return "";
  std::string verb = tokens[0];

  // Segment the remainder at prepositions: the first segment is the object.
  std::vector<std::pair<std::string, std::vector<std::string>>> segments{{"", {}}};
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    auto prep = kPrepositions.find(tokens[i]);
    if (prep != kPrepositions.end()) {
      segments.emplace_back(prep->second, std::vector<std::string>{});
      continue;
    }
    if (kDeterminers.count(tokens[i]) || kPronouns.count(tokens[i])) continue;
    segments.back().second.push_back(tokens[i]);
  }

  std::vector<std::string> out;
  auto emit = [&](auto make) {
    try {
      out.push_back(make());
    } catch (const FormatError&) {
      // Unusable pieces of the caption are skipped.
    }
  };
  if (request.layer == Layer::Conceptual) {
    emit([&] { return render(ConceptualFact::make(ConceptualRole::Action, gerund(verb))); });
    for (const auto& [prep, words] : segments) {
      if (words.empty()) continue;
      auto role = prep.empty() ? ConceptualRole::IngredientObject
                               : (prep == "with" ? ConceptualRole::Tool : ConceptualRole::Location);
      emit([&] { return render(ConceptualFact::make(role, text::join(words, " "))); });
    }
  } else {
    for (const auto& [prep, words] : segments) {
      if (words.empty()) continue;
      auto rel = prep.empty() ? ContextualRelation::Obj : *relation_from_string("act/" + prep);
      emit([&] { return render(ContextualFact::make(rel, verb, text::join(words, " "))); });
    }
  }
  return text::join(out, ", ");
}

HttpTextBackend::HttpTextBackend(std::string name, EndpointConfig config)
    : name_(std::move(name)), config_(std::move(config)) {}

std::string HttpTextBackend::complete(const TextRequest& request) {
  std::string body = http_post_json(config_, text_request_json(request));
  try {
    auto j = json::parse(body);
    return j.at("raw_text").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(name_ + ": malformed response: " + e.what());
  }
}

std::string_view to_string(EvidenceMode mode) {
  return mode == EvidenceMode::Textual ? "textual" : "multimodal";
}

EvidenceMode parse_evidence_mode(std::string_view s) {
  if (s == "textual") return EvidenceMode::Textual;
  if (s == "multimodal") return EvidenceMode::Multimodal;
  throw FormatError("unknown evidence mode \"" + std::string(s) + "\"");
}

Evidence Evidence::textual(std::string caption) {
  Evidence e;
  e.mode = EvidenceMode::Textual;
  e.caption = std::move(caption);
  return e;
}

Evidence Evidence::multimodal(SegmentRef segment) {
  Evidence e;
  e.mode = EvidenceMode::Multimodal;
  e.segment = std::move(segment);
  return e;
}

void Evidence::check() const {
  if (mode == EvidenceMode::Textual && text::trim(caption).empty())
    throw PreconditionError("textual evidence requires a caption");
  if (mode == EvidenceMode::Multimodal &&
      (segment.video_id.empty() || segment.end_ms <= segment.start_ms || segment.frames < 1))
    throw PreconditionError("multimodal evidence requires a valid segment reference");
}

std::string verify_request_json(const VerifyRequest& request) {
  ordered_json out;
  out["mode"] = to_string(request.evidence.mode);
  if (request.evidence.mode == EvidenceMode::Textual) {
    out["evidence"] = ordered_json{{"caption", request.evidence.caption}};
  } else {
    out["evidence"] = segment_json(request.evidence.segment);
  }
  out["fact_text"] = request.fact_text;
  out["clause_id"] = request.clause_id;
  return out.dump();
}

LookupVerifier::LookupVerifier(std::string name, std::set<EvidenceMode> modes, Script responses,
                               std::map<EvidenceMode, Script> by_mode,
                               std::optional<std::string> fallback)
    : name_(std::move(name)),
      modes_(std::move(modes)),
      responses_(std::move(responses)),
      by_mode_(std::move(by_mode)),
      fallback_(std::move(fallback)) {}

std::unique_ptr<LookupVerifier> LookupVerifier::from_file(const std::filesystem::path& path) {
  json j = read_json_file(path);
  auto read_script = [&](const json& obj, const std::string& where) {
    Script s;
    if (!obj.is_object()) throw FormatError(where + ": expected an object");
    for (const auto& [clause, facts] : obj.items()) {
      if (!facts.is_object()) throw FormatError(where + "." + clause + ": expected an object");
      for (const auto& [fact, label] : facts.items())
        s[clause][fact] = string_or_list(label, where + "." + clause);
    }
    return s;
  };
  std::set<EvidenceMode> modes = {EvidenceMode::Textual, EvidenceMode::Multimodal};
  if (auto it = j.find("modes"); it != j.end()) {
    modes.clear();
    for (const auto& m : *it) modes.insert(parse_evidence_mode(m.get<std::string>()));
  }
  Script responses;
  if (auto it = j.find("responses"); it != j.end()) responses = read_script(*it, "responses");
  std::map<EvidenceMode, Script> by_mode;
  if (auto it = j.find("by_mode"); it != j.end())
    for (const auto& [mode, script] : it->items())
      by_mode[parse_evidence_mode(mode)] = read_script(script, "by_mode." + mode);
  std::optional<std::string> fallback;
  if (auto it = j.find("default"); it != j.end()) fallback = it->get<std::string>();
  return std::make_unique<LookupVerifier>("lookup:" + path.filename().string(), std::move(modes),
                                          std::move(responses), std::move(by_mode), std::move(fallback));
}

std::string LookupVerifier::judge(const VerifyRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  auto find_in = [&](const Script& s) -> const std::vector<std::string>* {
    auto c = s.find(request.clause_id);
    if (c == s.end()) return nullptr;
    auto f = c->second.find(request.fact_text);
    return f == c->second.end() ? nullptr : &f->second;
  };
  const std::vector<std::string>* script = nullptr;
  if (auto m = by_mode_.find(request.evidence.mode); m != by_mode_.end()) script = find_in(m->second);
  if (!script) script = find_in(responses_);
  if (script) {
    std::string key = std::string(to_string(request.evidence.mode)) + "|" + request.clause_id + "|" +
                      request.fact_text;
    return next_scripted(served_, key, *script);
  }
  if (fallback_) return *fallback_;
  throw TransportError(name_ + ": no scripted verdict for \"" + request.fact_text + "\" in " +
                       request.clause_id);
}

GoldEchoVerifier::GoldEchoVerifier(const Dataset& dataset) {
  for (const auto& c : dataset.clauses)
    for (auto layer : kLayers)
      for (const auto& f : c.bundle(layer).positive) positives_[c.clause_id].insert(render(f));
}

std::string GoldEchoVerifier::judge(const VerifyRequest& request) {
  // Facts may arrive rendered with a display alias; compare canonical forms.
  std::string canonical = request.fact_text;
  for (auto layer : kLayers) {
    try {
      canonical = render(parse_fact(request.fact_text, layer));
      break;
    } catch (const FormatError&) {
    }
  }
  auto it = positives_.find(request.clause_id);
  bool supported = it != positives_.end() && it->second.count(canonical) > 0;
  return std::string(to_string(supported ? Label::Supported : Label::Refuted));
}

HttpVerifier::HttpVerifier(std::string name, EndpointConfig config, std::set<EvidenceMode> modes)
    : name_(std::move(name)), config_(std::move(config)), modes_(std::move(modes)) {}

std::string HttpVerifier::judge(const VerifyRequest& request) {
  std::string body = http_post_json(config_, verify_request_json(request));
  try {
    return json::parse(body).at("label_text").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(name_ + ": malformed response: " + e.what());
  }
}

std::string grounding_request_json(const GroundingRequest& request) {
  ordered_json out;
  out["mode"] = "grounding";
  out["evidence"] = segment_json(request.segment);
  out["fact_text"] = request.entity;
  out["clause_id"] = request.clause_id;
  return out.dump();
}

LookupGrounder::LookupGrounder(std::string name, Table table)
    : name_(std::move(name)), table_(std::move(table)) {}

std::unique_ptr<LookupGrounder> LookupGrounder::from_file(const std::filesystem::path& path) {
  json j = read_json_file(path);
  Table table;
  for (const auto& [clause, entities] : j.items()) {
    for (const auto& [entity, value] : entities.items()) {
      auto key = normalize_entity(entity);
      if (!key) throw FormatError(path.string() + ": empty entity in " + clause);
      std::vector<bool> frames;
      if (value.is_boolean()) {
        frames.push_back(value.get<bool>());
      } else if (value.is_array()) {
        for (const auto& b : value) frames.push_back(b.get<bool>());
      } else {
        throw FormatError(path.string() + ": grounding entries must be booleans or lists");
      }
      table[clause][*key] = std::move(frames);
    }
  }
  return std::make_unique<LookupGrounder>("lookup:" + path.filename().string(), std::move(table));
}

std::vector<bool> LookupGrounder::frames(const GroundingRequest& request) {
  auto key = normalize_entity(request.entity).value_or("");
  auto c = table_.find(request.clause_id);
  if (c != table_.end()) {
    auto e = c->second.find(key);
    if (e != c->second.end()) return e->second;
  }
  throw TransportError(name_ + ": no grounding entry for \"" + request.entity + "\" in " +
                       request.clause_id);
}

HttpGrounder::HttpGrounder(std::string name, EndpointConfig config)
    : name_(std::move(name)), config_(std::move(config)) {}

std::vector<bool> HttpGrounder::frames(const GroundingRequest& request) {
  std::string body = http_post_json(config_, grounding_request_json(request));
  try {
    auto j = json::parse(body);
    if (auto f = j.find("frames"); f != j.end()) return f->get<std::vector<bool>>();
    auto label = j.at("label_text").get<std::string>();
    if (text::equals_ci(text::trim(label), "grounded")) return {true};
    if (text::equals_ci(text::trim(label), "ungrounded")) return {false};
    throw TransportError(name_ + ": unrecognized grounding label \"" + label + "\"");
  } catch (const json::exception& e) {
    throw TransportError(name_ + ": malformed response: " + e.what());
  }
}

std::string http_post_json(const EndpointConfig& config, const std::string& body) {
  auto url = split_url(config.url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);
  if (!config.token_env.empty()) {
    const char* token = std::getenv(config.token_env.c_str());
    if (!token || !*token)
      throw TransportError("credential variable " + config.token_env + " is not set");
    client.set_bearer_token_auth(token);
  }
  auto res = client.Post(url.path, body, "application/json");
  if (!res) throw TransportError(config.url + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw TransportError(config.url + ": HTTP " + std::to_string(res->status));
  return res->body;
}

}  // namespace dualfact
