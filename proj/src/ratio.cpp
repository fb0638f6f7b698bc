#include "dualfact/ratio.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "dualfact/error.hpp"

namespace dualfact {

double Ratio::value() const {
  if (den <= 0) throw UndefinedMetricError("ratio with zero denominator");
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Ratio::percent() const {
  if (!defined()) return "--";
  return format_hundredths(percent_hundredths(num, den));
}

std::int64_t percent_hundredths(std::int64_t num, std::int64_t den) {
  if (den <= 0) throw UndefinedMetricError("percentage with zero denominator");
  bool neg = (num < 0);
  std::int64_t n = neg ? -num : num;
  // round(n * 10000 / den) with ties away from zero
  std::int64_t q = (2 * n * 10000 + den) / (2 * den);
  return neg ? -q : q;
}

std::string format_hundredths(std::int64_t hundredths) {
  bool neg = hundredths < 0;
  std::int64_t h = std::llabs(hundredths);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", neg ? "-" : "",
                static_cast<long long>(h / 100), static_cast<long long>(h % 100));
  return buf;
}

std::string format_percent(double value) { return format_fixed(value * 100.0, 2); }

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) return "--";
  double scale = std::pow(10.0, decimals);
  double mag = std::floor(std::fabs(value) * scale + 0.5 + 1e-9);
  auto units = static_cast<long long>(mag);
  long long p = static_cast<long long>(scale);
  char buf[64];
  const char* sign = (value < 0 && units != 0) ? "-" : "";
  if (decimals == 0) {
    std::snprintf(buf, sizeof buf, "%s%lld", sign, units);
  } else {
    std::snprintf(buf, sizeof buf, "%s%lld.%0*lld", sign, units / p, decimals, units % p);
  }
  return buf;
}

}  // namespace dualfact
