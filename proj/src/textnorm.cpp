#include "chair/textnorm.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <unordered_set>
#include <utility>

#include "chair/error.hpp"

namespace chair {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
         c >= 0x80;
}

char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

const std::unordered_map<std::string_view, std::string_view>& irregulars() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"people", "person"}, {"men", "man"},       {"women", "woman"},
      {"children", "child"}, {"geese", "goose"},  {"teeth", "tooth"},
      {"feet", "foot"},     {"mice", "mouse"},     {"oxen", "ox"},
      // -ves
      {"knives", "knife"},  {"wives", "wife"},     {"lives", "life"},
      {"leaves", "leaf"},   {"loaves", "loaf"},    {"halves", "half"},
      {"calves", "calf"},   {"shelves", "shelf"},  {"wolves", "wolf"},
      {"scarves", "scarf"}, {"thieves", "thief"},  {"hooves", "hoof"},
      {"elves", "elf"},     {"selves", "self"},
      // -ies words whose singular keeps the e
      {"ties", "tie"},      {"pies", "pie"},       {"lies", "lie"},
      {"dies", "die"},      {"movies", "movie"},   {"cookies", "cookie"},
      {"brownies", "brownie"}, {"hoodies", "hoodie"}, {"selfies", "selfie"},
      {"smoothies", "smoothie"}, {"zombies", "zombie"}, {"goalies", "goalie"},
      {"veggies", "veggie"}, {"birdies", "birdie"}, {"collies", "collie"},
      {"doggies", "doggie"}, {"bookies", "bookie"}, {"rookies", "rookie"},
      // -oes words that drop the e
      {"potatoes", "potato"}, {"tomatoes", "tomato"}, {"heroes", "hero"},
      {"echoes", "echo"},   {"mangoes", "mango"},  {"volcanoes", "volcano"},
      {"torpedoes", "torpedo"}, {"mosquitoes", "mosquito"}, {"dominoes", "domino"},
      {"goes", "go"},       {"does", "do"},
      // -ses words that drop the es
      {"buses", "bus"},     {"gases", "gas"},      {"lenses", "lens"},
      {"cactuses", "cactus"}, {"cacti", "cactus"}, {"octopuses", "octopus"},
      {"walruses", "walrus"}, {"canvases", "canvas"}, {"atlases", "atlas"},
      {"quizzes", "quiz"},
  };
  return table;
}

const std::unordered_set<std::string_view>& uninflected() {
  static const std::unordered_set<std::string_view> words = {
      "as",     "is",      "us",     "was",    "has",    "his",   "this",
      "yes",    "its",     "gas",    "bus",    "lens",   "news",  "series",
      "species", "chaos",  "canvas", "atlas",  "bias",   "alias", "always",
      "perhaps", "whereas", "across", "less",  "gps",    "dvds",
  };
  return words;
}

// Compound heads: "firemen" -> "fireman", "grandchildren" -> "grandchild".
const std::array<std::pair<std::string_view, std::string_view>, 4>& compound_heads() {
  static const std::array<std::pair<std::string_view, std::string_view>, 4> heads = {{
      {"women", "woman"},
      {"men", "man"},
      {"children", "child"},
      {"people", "person"},
  }};
  return heads;
}

const std::unordered_set<std::string_view>& men_exceptions() {
  static const std::unordered_set<std::string_view> words = {
      "specimen", "abdomen", "regimen", "stamen", "semen", "hymen", "omen", "amen",
  };
  return words;
}

std::string singularize_once(std::string_view w) {
  if (w.size() <= 1) return std::string(w);
  if (auto it = irregulars().find(w); it != irregulars().end()) {
    return std::string(it->second);
  }
  if (uninflected().contains(w)) return std::string(w);
  if (!men_exceptions().contains(w)) {
    for (const auto& [head, singular] : compound_heads()) {
      if (w.size() > head.size() + 2 && ends_with(w, head)) {
        return std::string(w.substr(0, w.size() - head.size())) + std::string(singular);
      }
    }
  }
  if (w.back() != 's') return std::string(w);
  if (ends_with(w, "ss") || ends_with(w, "us") || ends_with(w, "is")) {
    return std::string(w);
  }
  if (ends_with(w, "ies") && w.size() > 4) {
    return std::string(w.substr(0, w.size() - 3)) + "y";
  }
  if (ends_with(w, "es") && w.size() > 3) {
    std::string_view stem = w.substr(0, w.size() - 2);
    if (ends_with(stem, "ss") || ends_with(stem, "x") || ends_with(stem, "zz") ||
        ends_with(stem, "ch") || ends_with(stem, "sh")) {
      return std::string(stem);
    }
  }
  return std::string(w.substr(0, w.size() - 1));
}

}  // namespace

std::vector<Token> tokenize(std::string_view caption) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  const std::size_t n = caption.size();
  while (i < n) {
    while (i < n && !is_word_byte(static_cast<unsigned char>(caption[i]))) ++i;
    if (i == n) break;
    std::size_t start = i;
    while (i < n && is_word_byte(static_cast<unsigned char>(caption[i]))) ++i;
    Token tok;
    tok.surface = std::string(caption.substr(start, i - start));
    tok.lower = tok.surface;
    std::transform(tok.lower.begin(), tok.lower.end(), tok.lower.begin(), ascii_lower);
    tok.singular = singularize(tok.lower);
    tok.begin = start;
    tok.end = i;
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

std::string normalized_caption(std::string_view caption) {
  std::string out;
  for (const auto& tok : tokenize(caption)) {
    if (!out.empty()) out.push_back(' ');
    out += tok.lower;
  }
  return out;
}

std::string singularize(std::string_view word) {
  // Iterate to a fixed point so that e.g. "mens" -> "men" -> "man" and the
  // result is stable under a second application.
  std::string current(word);
  for (int i = 0; i < 8; ++i) {
    std::string next = singularize_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

ObjectMatcher::ObjectMatcher(const CategorySet& vocab) {
  if (vocab.empty()) {
    throw Error(ErrorCode::Config, "object vocabulary is empty");
  }
  // Keys whose surface form is already singular take precedence over keys
  // produced by singularizing a plural surface form.
  std::unordered_map<std::string, bool> exact;
  for (const auto& [fine, coarse] : vocab.fine_to_coarse()) {
    auto tokens = tokenize(fine);
    if (tokens.empty()) continue;
    std::string key;
    std::string lower;
    for (const auto& tok : tokens) {
      if (!key.empty()) {
        key.push_back(' ');
        lower.push_back(' ');
      }
      key += tok.singular;
      lower += tok.lower;
    }
    const bool is_exact = key == lower;
    auto [it, inserted] = phrases_.emplace(key, coarse);
    if (inserted) {
      exact[key] = is_exact;
    } else if (is_exact && !exact[key]) {
      it->second = coarse;
      exact[key] = true;
    }
    max_tokens_ = std::max(max_tokens_, tokens.size());
  }
}

std::vector<ObjectMention> ObjectMatcher::extract(std::string_view caption) const {
  return extract(tokenize(caption));
}

std::vector<ObjectMention> ObjectMatcher::extract(const std::vector<Token>& tokens) const {
  std::vector<ObjectMention> mentions;
  std::string key;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const std::size_t longest = std::min(max_tokens_, tokens.size() - i);
    bool matched = false;
    for (std::size_t len = longest; len >= 1; --len) {
      key.clear();
      for (std::size_t k = i; k < i + len; ++k) {
        if (k > i) key.push_back(' ');
        key += tokens[k].singular;
      }
      auto it = phrases_.find(key);
      if (it == phrases_.end()) continue;

      ObjectMention m;
      m.category = it->second;
      m.first_token = i;
      m.last_token = i + len - 1;
      m.n_tokens = len;
      m.begin = tokens[i].begin;
      m.end = tokens[i + len - 1].end;
      for (std::size_t k = i; k < i + len; ++k) {
        if (k > i) m.surface.push_back(' ');
        m.surface += tokens[k].lower;
      }
      mentions.push_back(std::move(m));
      i += len;
      matched = true;
      break;
    }
    if (!matched) ++i;
  }
  return mentions;
}

std::vector<ObjectMention> extract_objects(std::string_view caption,
                                           const CategorySet& vocab) {
  return ObjectMatcher(vocab).extract(caption);
}

}  // namespace chair
