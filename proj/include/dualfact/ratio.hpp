#pragma once

#include <cstdint>
#include <string>

namespace dualfact {

// An exact count ratio. Percentages in reports are rendered from the raw
// counts so that rounding never compounds.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 0;

  bool defined() const { return den > 0; }
  double value() const;  // throws UndefinedMetricError when den == 0

  // num/den * 100 rounded half-up to two decimals, or "--" when undefined.
  std::string percent() const;

  friend bool operator==(const Ratio&, const Ratio&) = default;
};

// Half-up rounding of an exact fraction to hundredths of a percent.
std::int64_t percent_hundredths(std::int64_t num, std::int64_t den);

// Formats hundredths as "<int>.<2 digits>", e.g. 8333 -> "83.33".
std::string format_hundredths(std::int64_t hundredths);

// value * 100 rounded half-up to two decimals; for quantities that are
// already means of ratios and have no single exact fraction.
std::string format_percent(double value);

// Fixed-point rendering with half-up rounding.
std::string format_fixed(double value, int decimals);

}  // namespace dualfact
