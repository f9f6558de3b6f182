#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chair/vocab.hpp"

namespace chair {

struct Token {
  std::string surface;   // bytes as they appear in the caption
  std::string lower;     // ASCII-lowercased surface
  std::string singular;  // singularized `lower`
  std::size_t begin = 0;  // byte span [begin, end) in the caption
  std::size_t end = 0;
};

/// Splits on whitespace and ASCII punctuation (hyphens and apostrophes
/// included), dropping the separators. Bytes >= 0x80 are word characters,
/// so UTF-8 sequences are never split.
std::vector<Token> tokenize(std::string_view caption);

/// Tokens lowercased and joined by single spaces.
std::string normalized_caption(std::string_view caption);

/// Rule-based English singularization of a lowercase word: irregular table,
/// then -ies, -ves, -es and -s suffix rules. Idempotent.
std::string singularize(std::string_view word);

struct ObjectMention {
  std::string category;  // coarse category
  std::string surface;   // matched tokens, lowercased, space joined
  std::size_t first_token = 0;
  std::size_t last_token = 0;  // inclusive
  std::size_t n_tokens = 0;
  std::size_t begin = 0;  // byte span of the match in the caption
  std::size_t end = 0;
};

/// Phrase index over a CategorySet. Keys are the singularized token
/// sequences of every fine-grained and coarse surface form.
class ObjectMatcher {
 public:
  explicit ObjectMatcher(const CategorySet& vocab);

  std::size_t max_phrase_tokens() const { return max_tokens_; }
  std::size_t n_phrases() const { return phrases_.size(); }

  /// Longest match first, left to right, non-overlapping.
  std::vector<ObjectMention> extract(std::string_view caption) const;
  std::vector<ObjectMention> extract(const std::vector<Token>& tokens) const;

 private:
  std::unordered_map<std::string, std::string> phrases_;
  std::size_t max_tokens_ = 0;
};

/// Convenience wrapper that builds a matcher per call. Scoring loops should
/// hold an ObjectMatcher instead.
std::vector<ObjectMention> extract_objects(std::string_view caption,
                                           const CategorySet& vocab);

}  // namespace chair
