#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dualfact {

// Binary verification outcome. SUPPORTED is the positive class everywhere.
enum class Label { Supported, Refuted };

std::string_view to_string(Label label);  // "SUPPORTED" | "REFUTED"

// Strict parse: the whole trimmed text must be one of the two tokens,
// case-insensitively. Anything else yields nullopt.
std::optional<Label> parse_label(std::string_view text);

struct Tally {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  Tally& operator+=(const Tally& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Tally&, const Tally&) = default;
};

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Precision and recall with empty denominators resolved as: 1 when the other
// error count is also zero (nothing to get wrong), else 0. F1 is 0 when
// precision + recall is 0, else their harmonic mean.
PRF prf(const Tally& t);

}  // namespace dualfact
