#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dualfact {

enum class CorrelationMethod { Pearson, Spearman, Kendall };
std::string_view to_string(CorrelationMethod m);
CorrelationMethod parse_correlation_method(std::string_view s);

struct PairedScores {
  std::vector<double> x;  // metric
  std::vector<double> y;  // human
  std::size_t dropped = 0;

  // Pairs keys present in both maps; a key with a missing human score or no
  // metric score is dropped and counted.
  static PairedScores align(const std::map<std::string, double>& metric,
                            const std::map<std::string, std::optional<double>>& human);
};

// Two numeric columns per line, comma, tab or whitespace separated. An empty,
// "NA" or "nan" cell drops the row (counted). A non-numeric first line is a
// header.
PairedScores load_paired_scores(const std::filesystem::path& path);

// Average (1-based) ranks with ties sharing the mean of their positions.
std::vector<double> mid_ranks(const std::vector<double>& v);

// Pearson r, Spearman rho on mid-ranks, or Kendall tau-b. Throws
// PreconditionError for n < 2 or unequal lengths and UndefinedMetricError when
// a vector has no variance (the message names "x" or "y").
double correlate(const PairedScores& pairs, CorrelationMethod method);

struct LabelPairs {
  std::vector<std::string> a;
  std::vector<std::string> b;
  std::vector<std::string> alphabet;  // empty: the labels that occur
};

// (p_o - p_e) / (1 - p_e). When p_e = 1 the result is 1 for perfect agreement
// and UndefinedMetricError otherwise.
double cohen_kappa(const LabelPairs& pairs);

// Two label columns per line, same separators as load_paired_scores.
LabelPairs load_label_pairs(const std::filesystem::path& path, bool header = false);

}  // namespace dualfact
