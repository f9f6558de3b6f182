#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chair/ingest.hpp"
#include "chair/textnorm.hpp"

namespace chair {

/// Exact non-negative ratio. A zero denominator reads as 0.
struct Rational {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
  /// Percentage rounded half-up to tenths, e.g. 1/3 -> 333.
  std::int64_t percent_tenths() const;
  /// Percentage with one decimal, e.g. 1/3 -> 33.3.
  double percent() const { return static_cast<double>(percent_tenths()) / 10.0; }

  /// Cross-multiplied comparison; no reduction needed.
  friend bool same_value(const Rational& a, const Rational& b) {
    return static_cast<unsigned __int128>(a.num) * b.den ==
           static_cast<unsigned __int128>(b.num) * a.den;
  }
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct ImageEval {
  ImageId image_id;
  std::set<std::string> predicted_objects;  // deduplicated per caption
  std::set<std::string> hallucinated;       // predicted_objects \ gt_objects
  std::set<std::string> gt_objects;
  std::size_t n_mentions = 0;               // before deduplication
  std::optional<DomainTag> domain;

  friend bool operator==(const ImageEval&, const ImageEval&) = default;
};

/// CHAIR_i = hallucinated objects / objects in predictions,
/// CHAIR_s = captions with a hallucinated object / captions.
/// Objects are deduplicated per caption before counting.
struct ChairReport {
  Rational chair_i;
  Rational chair_s;
  std::uint64_t n_sentences = 0;
  std::uint64_t n_objects_total = 0;
  std::uint64_t n_hallucinated_objects = 0;
  std::uint64_t n_hallucinated_sentences = 0;
  std::uint64_t n_mentions_total = 0;
  std::uint64_t n_skipped = 0;
  /// Set when no prediction contained any vocabulary object, so CHAIR_i is
  /// 0 by convention rather than by measurement.
  bool zero_object_corpus = false;
  std::optional<DomainTag> slice;
  std::vector<ImageEval> per_image;  // sorted by image_id

  double mean_objects_per_caption() const {
    return n_sentences == 0 ? 0.0 : static_cast<double>(n_objects_total) / n_sentences;
  }

  friend bool operator==(const ChairReport&, const ChairReport&) = default;
};

struct ScoreOptions {
  GroundTruthPolicy policy = GroundTruthPolicy::Union;
  std::optional<DomainTag> slice;
  /// Exclude records without a prediction instead of failing.
  bool allow_missing = false;
  /// Parallel workers; 0 means all available cores.
  int workers = 0;
};

ImageEval evaluate_image(const ImageId& image_id, std::string_view prediction,
                         const GroundTruthObjects& gt, const ObjectMatcher& matcher);
ImageEval evaluate_image(std::string_view prediction, const GroundTruthObjects& gt,
                         const CategorySet& vocab);

/// Sums per-image evaluations into a report. Order of `evals` is irrelevant.
ChairReport aggregate(std::vector<ImageEval> evals, std::optional<DomainTag> slice = {},
                      std::uint64_t n_skipped = 0);

/// OpenMP scorer. Produces the same report for any worker count.
ChairReport score_corpus(const std::vector<CaptionRecord>& records, const ObjectMatcher& matcher,
                         const ScoreOptions& options = {});
ChairReport score_corpus(const std::vector<CaptionRecord>& records, const CategorySet& vocab,
                         const ScoreOptions& options = {});

/// Single-threaded scorer kept as the reference for the parallel path.
ChairReport score_corpus_reference(const std::vector<CaptionRecord>& records,
                                   const ObjectMatcher& matcher, const ScoreOptions& options = {});

/// Difference in mean (deduplicated) objects per caption, baseline minus
/// candidate.
double object_count_stats(const ChairReport& baseline, const ChairReport& candidate);

/// The corpus-level numbers a comparison needs. Rates are fractions in
/// [0, 1].
struct ChairSummary {
  double chair_i = 0.0;
  double chair_s = 0.0;
  std::optional<std::uint64_t> n_sentences;
  std::optional<double> mean_objects_per_caption;
};

ChairSummary summarize(const ChairReport& report);
/// Reads a report JSON as written by `to_json(ChairReport)`. Exact counts are
/// used when present, otherwise the percentage fields.
ChairSummary summary_from_json(const nlohmann::json& doc);

struct ComparisonReport {
  ChairSummary baseline;
  ChairSummary candidate;
  double delta_chair_i = 0.0;  // candidate - baseline, percentage points
  double delta_chair_s = 0.0;
  /// (baseline - candidate) / baseline CHAIR_s, in percent. Empty when the
  /// baseline CHAIR_s is zero.
  std::optional<double> relative_reduction_chair_s;
  std::vector<std::string> notes;
};

ComparisonReport compare(const ChairSummary& baseline, const ChairSummary& candidate);
ComparisonReport compare(const ChairReport& baseline, const ChairReport& candidate);

nlohmann::json to_json(const ImageEval& eval);
nlohmann::json to_json(const ChairReport& report, bool include_per_image = true);
nlohmann::json to_json(const ComparisonReport& report);
/// Header plus one summary row.
std::string to_csv(const ChairReport& report);

/// Rounds to one decimal, half away from zero.
double round_tenth(double value);

}  // namespace chair
