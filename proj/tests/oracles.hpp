#pragma once

// Brute-force reference implementations. They share no code with the
// library beyond the tokenizer and singularizer, and favour plain loops
// over speed.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chair/textnorm.hpp"
#include "chair/vocab.hpp"
#include "test_support.hpp"

namespace chair_test::oracle {

// ---------------------------------------------------------------------------
// CHAIR counts over a planted corpus.

struct ChairCounts {
  std::uint64_t hallucinated_objects = 0;
  std::uint64_t objects = 0;
  std::uint64_t hallucinated_sentences = 0;
  std::uint64_t sentences = 0;
  std::uint64_t mentions = 0;
  std::uint64_t skipped = 0;
};

inline bool in_list(const std::vector<std::string>& list, const std::string& x) {
  for (const auto& y : list) {
    if (y == x) return true;
  }
  return false;
}

inline ChairCounts brute_force_chair(const PlantedCorpus& corpus) {
  ChairCounts c;
  for (const auto& img : corpus.images) {
    if (corpus.options.slice && img.domain != corpus.options.slice) continue;
    if (!img.prediction) {
      ++c.skipped;
      continue;
    }

    std::vector<std::string> truth;
    const bool use_refs = corpus.options.policy != chair::GroundTruthPolicy::InstancesOnly;
    const bool use_inst = corpus.options.policy != chair::GroundTruthPolicy::ReferencesOnly;
    if (use_refs) {
      for (const auto& ref : img.references) {
        for (const auto& o : ref.objects) {
          if (!in_list(truth, o)) truth.push_back(o);
        }
      }
    }
    if (use_inst && img.instances) {
      for (const auto& o : *img.instances) {
        if (!in_list(truth, o)) truth.push_back(o);
      }
    }

    std::vector<std::string> predicted;
    for (const auto& o : img.prediction->objects) {
      ++c.mentions;
      if (!in_list(predicted, o)) predicted.push_back(o);
    }

    bool any = false;
    for (const auto& o : predicted) {
      ++c.objects;
      if (!in_list(truth, o)) {
        ++c.hallucinated_objects;
        any = true;
      }
    }
    ++c.sentences;
    if (any) ++c.hallucinated_sentences;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Greedy n-gram extraction.

struct Phrase {
  std::vector<std::string> words;  // singularized
  std::string category;
};

struct Match {
  std::string category;
  std::size_t first = 0;
  std::size_t last = 0;

  friend bool operator==(const Match&, const Match&) = default;
};

inline std::vector<Phrase> phrases_of(const chair::CategorySet& vocab) {
  std::vector<Phrase> out;
  for (const auto& [fine, coarse] : vocab.fine_to_coarse()) {
    Phrase p;
    for (const auto& t : chair::tokenize(fine)) p.words.push_back(chair::singularize(t.lower));
    p.category = coarse;
    out.push_back(std::move(p));
  }
  return out;
}

/// Tries every window length from the longest phrase down to one word at
/// each position, scanning the phrase list linearly.
inline std::vector<Match> greedy_ngram(const std::string& caption, const chair::CategorySet& vocab) {
  const auto phrases = phrases_of(vocab);
  std::size_t max_n = 0;
  for (const auto& p : phrases) max_n = std::max(max_n, p.words.size());

  std::vector<std::string> words;
  for (const auto& t : chair::tokenize(caption)) words.push_back(chair::singularize(t.lower));

  std::vector<Match> out;
  std::size_t i = 0;
  while (i < words.size()) {
    bool matched = false;
    for (std::size_t n = max_n; n >= 1 && !matched; --n) {
      if (i + n > words.size()) continue;
      std::vector<std::string> window(words.begin() + i, words.begin() + i + n);
      for (const auto& p : phrases) {
        if (p.words == window) {
          out.push_back({p.category, i, i + n - 1});
          i += n;
          matched = true;
          break;
        }
      }
    }
    if (!matched) ++i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchy coarsening on a parent-array tree.

struct Coarsening {
  std::set<std::string> categories;
  std::map<std::string, std::string> fine_to_coarse;
};

inline Coarsening coarsen(const RandomTree& tree) {
  const std::size_t n = tree.parent.size();
  std::vector<std::size_t> kids(n, 0);
  for (std::size_t i = 1; i < n; ++i) ++kids[tree.parent[i]];
  auto kept = [&](std::size_t i) {
    if (i == 0) return false;
    return kids[i] > 0 || tree.parent[i] == 0;
  };
  Coarsening out;
  for (std::size_t i = 1; i < n; ++i) {
    if (kept(i)) out.categories.insert(tree.names[i]);
    std::size_t j = i;
    while (!kept(j)) j = tree.parent[j];
    out.fine_to_coarse[tree.names[i]] = tree.names[j];
  }
  return out;
}

}  // namespace chair_test::oracle
