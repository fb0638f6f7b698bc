#include "dualfact/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "dualfact/error.hpp"
#include "dualfact/text.hpp"

namespace dualfact {

std::string_view to_string(CorrelationMethod m) {
  switch (m) {
    case CorrelationMethod::Pearson: return "pearson";
    case CorrelationMethod::Spearman: return "spearman";
    case CorrelationMethod::Kendall: return "kendall";
  }
  return "";
}

CorrelationMethod parse_correlation_method(std::string_view s) {
  if (s == "pearson") return CorrelationMethod::Pearson;
  if (s == "spearman") return CorrelationMethod::Spearman;
  if (s == "kendall") return CorrelationMethod::Kendall;
  throw FormatError("unknown correlation method \"" + std::string(s) + "\"");
}

PairedScores PairedScores::align(const std::map<std::string, double>& metric,
                                 const std::map<std::string, std::optional<double>>& human) {
  PairedScores p;
  for (const auto& [key, m] : metric) {
    auto h = human.find(key);
    if (h == human.end() || !h->second) {
      ++p.dropped;
      continue;
    }
    p.x.push_back(m);
    p.y.push_back(*h->second);
  }
  for (const auto& [key, h] : human)
    if (!metric.count(key)) ++p.dropped;
  return p;
}

namespace {

std::optional<double> parse_cell(const std::string& cell, bool& missing) {
  std::string c = text::to_lower(text::trim(cell));
  missing = c.empty() || c == "na" || c == "nan";
  if (missing) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(c, &used);
    if (used != c.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  char sep = line.find(',') != std::string::npos ? ',' : (line.find('\t') != std::string::npos ? '\t' : ' ');
  if (sep == ' ') return text::split_words(text::collapse_whitespace(line));
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

bool constant(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (constant(x)) throw UndefinedMetricError("correlation undefined: x has zero variance");
  if (constant(y)) throw UndefinedMetricError("correlation undefined: y has zero variance");
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Pairs tied within runs of equal values of a sorted sequence.
template <class Eq>
std::int64_t tied_pairs(const std::vector<std::size_t>& order, Eq eq) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && eq(order[i - 1], order[i])) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Merge sort of `idx` by y, returning the number of inversions.
std::int64_t sort_count_swaps(std::vector<std::size_t>& idx, const std::vector<double>& y) {
  std::vector<std::size_t> buf(idx.size());
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < idx.size(); width *= 2) {
    for (std::size_t lo = 0; lo < idx.size(); lo += 2 * width) {
      std::size_t mid = std::min(lo + width, idx.size()), hi = std::min(lo + 2 * width, idx.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (y[idx[j]] < y[idx[i]]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = idx[j++];
        } else {
          buf[k++] = idx[i++];
        }
      }
      while (i < mid) buf[k++] = idx[i++];
      while (j < hi) buf[k++] = idx[j++];
    }
    idx.swap(buf);
  }
  return swaps;
}

// Knight's algorithm.
double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<std::int64_t>(x.size());
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
  });
  const std::int64_t n0 = n * (n - 1) / 2;
  const std::int64_t n1 = tied_pairs(idx, [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const std::int64_t n3 =
      tied_pairs(idx, [&](std::size_t a, std::size_t b) { return x[a] == x[b] && y[a] == y[b]; });
  const std::int64_t swaps = sort_count_swaps(idx, y);
  const std::int64_t n2 = tied_pairs(idx, [&](std::size_t a, std::size_t b) { return y[a] == y[b]; });
  if (n0 == n1) throw UndefinedMetricError("correlation undefined: x has zero variance");
  if (n0 == n2) throw UndefinedMetricError("correlation undefined: y has zero variance");
  double num = static_cast<double>(n0 - n1 - n2 + n3 - 2 * swaps);
  double den = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(num / den, -1.0, 1.0);
}

}  // namespace

PairedScores load_paired_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  PairedScores p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto cells = split_row(line);
    if (cells.size() != 2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    bool mx = false, my = false;
    auto x = parse_cell(cells[0], mx);
    auto y = parse_cell(cells[1], my);
    if (mx || my) {
      ++p.dropped;
      continue;
    }
    if (!x || !y) {
      if (lineno == 1) continue;  // header
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell");
    }
    p.x.push_back(*x);
    p.y.push_back(*y);
  }
  return p;
}

LabelPairs load_label_pairs(const std::filesystem::path& path, bool header) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  LabelPairs p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty() || (header && lineno == 1)) continue;
    auto cells = split_row(line);
    if (cells.size() != 2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
    p.a.push_back(text::trim(cells[0]));
    p.b.push_back(text::trim(cells[1]));
  }
  return p;
}

std::vector<double> mid_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

double correlate(const PairedScores& pairs, CorrelationMethod method) {
  if (pairs.x.size() != pairs.y.size()) throw PreconditionError("paired vectors differ in length");
  if (pairs.x.size() < 2) throw PreconditionError("correlation needs at least two pairs");
  switch (method) {
    case CorrelationMethod::Pearson: return pearson(pairs.x, pairs.y);
    case CorrelationMethod::Spearman: return pearson(mid_ranks(pairs.x), mid_ranks(pairs.y));
    case CorrelationMethod::Kendall: return kendall_tau_b(pairs.x, pairs.y);
  }
  return 0;
}

double cohen_kappa(const LabelPairs& pairs) {
  if (pairs.a.size() != pairs.b.size()) throw PreconditionError("label vectors differ in length");
  if (pairs.a.empty()) throw PreconditionError("kappa needs at least one item");
  std::set<std::string> alphabet(pairs.alphabet.begin(), pairs.alphabet.end());
  std::map<std::string, std::int64_t> row, col;
  std::int64_t agree = 0;
  for (std::size_t i = 0; i < pairs.a.size(); ++i) {
    for (const auto* l : {&pairs.a[i], &pairs.b[i]})
      if (!pairs.alphabet.empty() && !alphabet.count(*l))
        throw PreconditionError("label \"" + *l + "\" is not in the alphabet");
    ++row[pairs.a[i]];
    ++col[pairs.b[i]];
    agree += pairs.a[i] == pairs.b[i];
  }
  const auto n = static_cast<std::int64_t>(pairs.a.size());
  // Scaled by n^2: p_o = agree / n, p_e = chance / n^2.
  std::int64_t chance = 0;
  for (const auto& [label, r] : row) {
    auto c = col.find(label);
    if (c != col.end()) chance += r * c->second;
  }
  if (chance == n * n) {
    if (agree == n) return 1.0;
    throw UndefinedMetricError("kappa undefined: chance agreement is 1");
  }
  return static_cast<double>(n * agree - chance) / static_cast<double>(n * n - chance);
}

}  // namespace dualfact
