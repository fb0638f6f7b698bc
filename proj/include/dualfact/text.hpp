#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dualfact::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Trims and replaces every run of whitespace with a single space.
std::string collapse_whitespace(std::string_view s);

// Whitespace tokenization of an already-normalized string.
std::vector<std::string> split_words(std::string_view s);

// Lowercased alphanumeric word tokens; punctuation acts as a separator.
std::vector<std::string> word_tokens(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool starts_with_ci(std::string_view s, std::string_view prefix);
bool equals_ci(std::string_view a, std::string_view b);

// Conservative suffix stripping: -s, -es, -ing, -ed, then a final silent e
// and a doubled final consonant. Input is expected lowercase.
std::string stem(std::string_view word);

// Stems of the word tokens of `s`.
std::set<std::string> stem_set(std::string_view s);

// True when the two texts share a word stem, or a word of at least three
// characters of one occurs inside a word of the other.
bool shares_lexical_material(std::string_view a, std::string_view b);

// True for pure digit tokens and spelled-out small cardinals.
bool is_numeral(std::string_view token);

// 64-bit FNV-1a; used for config hashes and seed mixing.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 14695981039346656037ULL);

std::string hex64(std::uint64_t v);

}  // namespace dualfact::text
