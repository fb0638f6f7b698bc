#include "dualfact/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>

namespace dualfact::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    // Bytes >= 0x80 belong to UTF-8 sequences and are kept inside words.
    if (std::isalnum(u) || u >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && equals_ci(s.substr(0, prefix.size()), prefix);
}

bool equals_ci(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string stem(std::string_view word) {
  std::string w(word);
  if (w.size() <= 3) return w;

  if (ends_with(w, "ing") && w.size() >= 6) {
    w.resize(w.size() - 3);
  } else if (ends_with(w, "ed") && w.size() >= 5) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "es") && w.size() >= 5 &&
             (ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "ses") ||
              ends_with(w, "xes") || ends_with(w, "zes") || ends_with(w, "oes"))) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "s") && !ends_with(w, "ss") && w.size() >= 4) {
    w.resize(w.size() - 1);
  }

  if (w.size() >= 4 && w.back() == 'e') w.pop_back();
  if (w.size() >= 4) {
    char a = w[w.size() - 2], b = w[w.size() - 1];
    if (a == b && !is_vowel(b) && std::isalpha(static_cast<unsigned char>(b))) w.pop_back();
  }
  return w;
}

std::set<std::string> stem_set(std::string_view s) {
  std::set<std::string> out;
  for (const auto& t : word_tokens(s)) out.insert(stem(t));
  return out;
}

bool shares_lexical_material(std::string_view a, std::string_view b) {
  auto ta = word_tokens(a), tb = word_tokens(b);
  for (const auto& x : ta) {
    for (const auto& y : tb) {
      if (stem(x) == stem(y)) return true;
      if (x.size() >= 3 && y.find(x) != std::string::npos) return true;
      if (y.size() >= 3 && x.find(y) != std::string::npos) return true;
    }
  }
  return false;
}

bool is_numeral(std::string_view token) {
  static constexpr std::array<std::string_view, 24> kWords = {
      "zero",   "one",    "two",       "three",    "four",    "five",
      "six",    "seven",  "eight",     "nine",     "ten",     "eleven",
      "twelve", "dozen",  "half",      "quarter",  "single",  "double",
      "triple", "couple", "hundred",   "thousand", "several", "few"};
  if (token.empty()) return false;
  bool digit = std::any_of(token.begin(), token.end(),
                           [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  bool numeric_chars = std::all_of(token.begin(), token.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '/' || c == ',';
  });
  if (digit && numeric_chars) return true;
  return std::find(kWords.begin(), kWords.end(), token) != kWords.end();
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dualfact::text
