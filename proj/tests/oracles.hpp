#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dualfact/verification.hpp"

namespace oracle {

// Nested mean: for each video, mean over its types of (correct / count).
inline std::map<std::string, double> per_video(const std::vector<dualfact::LabeledVerdict>& rows) {
  std::set<std::string> videos;
  for (const auto& r : rows) videos.insert(r.video_id);
  std::map<std::string, double> out;
  for (const auto& v : videos) {
    std::set<std::string> types;
    for (const auto& r : rows)
      if (r.video_id == v) types.insert(r.slot);
    double total = 0;
    for (const auto& t : types) {
      double correct = 0, n = 0;
      for (const auto& r : rows)
        if (r.video_id == v && r.slot == t) {
          n += 1;
          correct += r.predicted == r.gold ? 1 : 0;
        }
      total += correct / n;
    }
    out[v] = total / static_cast<double>(types.size());
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean(x), my = mean(y), sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Rank of each value as 1 + (#smaller) + (#equal - 1) / 2, by direct counting.
inline std::vector<double> mid_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) less += 1;
      if (v == x[i]) equal += 1;
    }
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(mid_ranks(x), mid_ranks(y));
}

// Tau-b over all pairs.
inline double kendall(const std::vector<double>& x, const std::vector<double>& y) {
  double concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        tie_x += 1;
      } else if (dy == 0) {
        tie_y += 1;
      } else if ((dx > 0) == (dy > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  return (concordant - discordant) /
         std::sqrt((concordant + discordant + tie_x) * (concordant + discordant + tie_y));
}

// Kappa from an explicit contingency table.
inline double kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> labels(a.begin(), a.end());
  labels.insert(b.begin(), b.end());
  std::map<std::string, std::map<std::string, double>> table;
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1;
  double n = static_cast<double>(a.size()), po = 0, pe = 0;
  for (const auto& l : labels) {
    po += table[l][l] / n;
    double row = 0, col = 0;
    for (const auto& m : labels) {
      row += table[l][m];
      col += table[m][l];
    }
    pe += (row / n) * (col / n);
  }
  return (po - pe) / (1 - pe);
}

}  // namespace oracle
