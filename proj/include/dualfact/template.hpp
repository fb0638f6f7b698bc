#pragma once

// Prompt templates for the text backends. A template file is JSON:
//   {"template_id": "...", "layer": "conceptual" | "contextual",
//    "system" | "system_file": "...", "body": "...",
//    "few_shot": [{"input": "...", "output": "..."}]}
// Placeholders in the body are written {{name}} with name in [a-z0-9_].
// {{few_shot}} is always bound to the rendered examples.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dualfact/fact.hpp"

namespace dualfact {

struct FewShot {
  std::string input;
  std::string output;
};

struct PromptTemplate {
  std::string template_id;
  Layer layer = Layer::Conceptual;
  std::string system;
  std::string body;
  std::vector<FewShot> few_shot;

  // Placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  // System text, a blank line, then the expanded body. Throws FormatError
  // for unbound placeholders or malformed braces.
  std::string render(const std::map<std::string, std::string>& bindings) const;

  static PromptTemplate load(const std::filesystem::path& path);
};

std::string render_few_shot(const std::vector<FewShot>& examples);

}  // namespace dualfact
