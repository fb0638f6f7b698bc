#include "dualfact/template.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dualfact/error.hpp"
#include "json.hpp"

namespace dualfact {

namespace {

bool name_char(char c) { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'; }

// Calls on_text for literal runs and on_name for each placeholder.
template <class Text, class Name>
void scan(const std::string& body, const std::string& id, Text on_text, Name on_name) {
  std::size_t i = 0;
  while (i < body.size()) {
    auto open = body.find("{{", i);
    if (open == std::string::npos) {
      on_text(body.substr(i));
      return;
    }
    on_text(body.substr(i, open - i));
    auto close = body.find("}}", open + 2);
    if (close == std::string::npos) throw FormatError(id + ": unterminated placeholder");
    std::string name = body.substr(open + 2, close - open - 2);
    if (name.empty() || !std::all_of(name.begin(), name.end(), name_char))
      throw FormatError(id + ": bad placeholder name \"" + name + "\"");
    on_name(name);
    i = close + 2;
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string render_few_shot(const std::vector<FewShot>& examples) {
  std::string out;
  for (const auto& ex : examples) out += "Input: " + ex.input + "\nOutput: " + ex.output + "\n\n";
  return out;
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  scan(body, template_id, [](const std::string&) {}, [&](const std::string& n) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  });
  return out;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
  std::string expanded;
  scan(body, template_id, [&](const std::string& t) { expanded += t; }, [&](const std::string& n) {
    if (n == "few_shot" && !bindings.count(n)) {
      expanded += render_few_shot(few_shot);
      return;
    }
    auto it = bindings.find(n);
    if (it == bindings.end()) throw FormatError(template_id + ": unbound placeholder {{" + n + "}}");
    expanded += it->second;
  });
  if (system.empty()) return expanded;
  std::string out = system;
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out + "\n\n" + expanded;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  PromptTemplate t;
  try {
    t.template_id = j.at("template_id").get<std::string>();
    t.layer = parse_layer(j.at("layer").get<std::string>());
    if (j.contains("system_file")) {
      t.system = slurp(path.parent_path() / j["system_file"].get<std::string>());
    } else if (j.contains("system")) {
      t.system = j["system"].get<std::string>();
    }
    t.body = j.at("body").get<std::string>();
    for (const auto& ex : j.value("few_shot", nlohmann::json::array()))
      t.few_shot.push_back({ex.at("input").get<std::string>(), ex.at("output").get<std::string>()});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (t.template_id.empty()) throw FormatError(path.string() + ": empty template_id");
  if (t.body.empty()) throw FormatError(path.string() + ": empty body");
  t.placeholders();  // validates the grammar up front
  return t;
}

}  // namespace dualfact
