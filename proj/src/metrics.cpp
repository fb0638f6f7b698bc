#include "dualfact/metrics.hpp"

#include "dualfact/text.hpp"

namespace dualfact {

std::string_view to_string(Label label) {
  return label == Label::Supported ? "SUPPORTED" : "REFUTED";
}

std::optional<Label> parse_label(std::string_view text) {
  std::string t = text::trim(text);
  if (text::equals_ci(t, "supported")) return Label::Supported;
  if (text::equals_ci(t, "refuted")) return Label::Refuted;
  return std::nullopt;
}

PRF prf(const Tally& t) {
  PRF out;
  if (t.tp + t.fp > 0)
    out.precision = static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fp);
  else
    out.precision = t.fn == 0 ? 1.0 : 0.0;
  if (t.tp + t.fn > 0)
    out.recall = static_cast<double>(t.tp) / static_cast<double>(t.tp + t.fn);
  else
    out.recall = t.fp == 0 ? 1.0 : 0.0;
  double s = out.precision + out.recall;
  out.f1 = s > 0 ? 2.0 * out.precision * out.recall / s : 0.0;
  return out;
}

}  // namespace dualfact
