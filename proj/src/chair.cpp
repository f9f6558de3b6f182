#include "chair/chair.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>

#include <omp.h>

#include "chair/error.hpp"

namespace chair {

namespace {

struct Scope {
  std::vector<const CaptionRecord*> records;
  std::uint64_t n_skipped = 0;
};

Scope select_scope(const std::vector<CaptionRecord>& records, const ScoreOptions& options) {
  Scope scope;
  std::vector<const CaptionRecord*> missing;
  for (const auto& rec : records) {
    if (options.slice && rec.domain != options.slice) continue;
    if (!rec.prediction) {
      missing.push_back(&rec);
      continue;
    }
    scope.records.push_back(&rec);
  }
  if (!missing.empty()) {
    if (!options.allow_missing) {
      std::string msg = std::to_string(missing.size()) + " record(s) have no prediction:";
      for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
        msg += " " + missing[i]->image_id.text();
      }
      if (missing.size() > 10) msg += " ...";
      throw Error(ErrorCode::MissingPredictions, msg);
    }
    scope.n_skipped = missing.size();
  }
  return scope;
}

ImageEval evaluate_record(const CaptionRecord& rec, const ObjectMatcher& matcher,
                          GroundTruthPolicy policy) {
  const auto gt = ground_truth_objects(rec, matcher, policy);
  auto eval = evaluate_image(rec.image_id, *rec.prediction, gt, matcher);
  eval.domain = rec.domain;
  return eval;
}

nlohmann::json string_set(const std::set<std::string>& items) {
  return nlohmann::json(std::vector<std::string>(items.begin(), items.end()));
}

nlohmann::json summary_json(const ChairSummary& s) {
  nlohmann::json out = {
      {"chair_i", round_tenth(100.0 * s.chair_i)},
      {"chair_s", round_tenth(100.0 * s.chair_s)},
  };
  out["n_sentences"] = s.n_sentences ? nlohmann::json(*s.n_sentences) : nlohmann::json();
  out["mean_objects_per_caption"] =
      s.mean_objects_per_caption ? nlohmann::json(*s.mean_objects_per_caption) : nlohmann::json();
  return out;
}

}  // namespace

std::int64_t Rational::percent_tenths() const {
  if (den == 0) return 0;
  const auto n = static_cast<unsigned __int128>(num);
  return static_cast<std::int64_t>((2000 * n + den) / (2 * static_cast<unsigned __int128>(den)));
}

double round_tenth(double value) { return std::round(value * 10.0) / 10.0; }

ImageEval evaluate_image(const ImageId& image_id, std::string_view prediction,
                         const GroundTruthObjects& gt, const ObjectMatcher& matcher) {
  ImageEval eval;
  eval.image_id = image_id;
  auto mentions = matcher.extract(prediction);
  eval.n_mentions = mentions.size();
  for (auto& m : mentions) eval.predicted_objects.insert(std::move(m.category));
  for (const auto& [name, provenance] : gt.objects) eval.gt_objects.insert(name);
  std::set_difference(eval.predicted_objects.begin(), eval.predicted_objects.end(),
                      eval.gt_objects.begin(), eval.gt_objects.end(),
                      std::inserter(eval.hallucinated, eval.hallucinated.end()));
  return eval;
}

ImageEval evaluate_image(std::string_view prediction, const GroundTruthObjects& gt,
                         const CategorySet& vocab) {
  return evaluate_image(gt.image_id, prediction, gt, ObjectMatcher(vocab));
}

ChairReport aggregate(std::vector<ImageEval> evals, std::optional<DomainTag> slice,
                      std::uint64_t n_skipped) {
  ChairReport report;
  report.slice = slice;
  report.n_skipped = n_skipped;
  report.n_sentences = evals.size();
  for (const auto& e : evals) {
    report.n_objects_total += e.predicted_objects.size();
    report.n_hallucinated_objects += e.hallucinated.size();
    report.n_hallucinated_sentences += e.hallucinated.empty() ? 0 : 1;
    report.n_mentions_total += e.n_mentions;
  }
  report.chair_i = {report.n_hallucinated_objects, report.n_objects_total};
  report.chair_s = {report.n_hallucinated_sentences, report.n_sentences};
  report.zero_object_corpus = report.n_objects_total == 0;
  std::sort(evals.begin(), evals.end(),
            [](const ImageEval& a, const ImageEval& b) { return a.image_id < b.image_id; });
  report.per_image = std::move(evals);
  return report;
}

ChairReport score_corpus(const std::vector<CaptionRecord>& records, const ObjectMatcher& matcher,
                         const ScoreOptions& options) {
  check_unique_ids(records);
  const Scope scope = select_scope(records, options);
  const auto n = static_cast<std::int64_t>(scope.records.size());
  std::vector<ImageEval> evals(scope.records.size());

  const int workers = options.workers > 0 ? options.workers : omp_get_max_threads();
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for num_threads(workers) schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      evals[i] = evaluate_record(*scope.records[i], matcher, options.policy);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return aggregate(std::move(evals), options.slice, scope.n_skipped);
}

ChairReport score_corpus(const std::vector<CaptionRecord>& records, const CategorySet& vocab,
                         const ScoreOptions& options) {
  return score_corpus(records, ObjectMatcher(vocab), options);
}

ChairReport score_corpus_reference(const std::vector<CaptionRecord>& records,
                                   const ObjectMatcher& matcher, const ScoreOptions& options) {
  check_unique_ids(records);
  const Scope scope = select_scope(records, options);
  std::vector<ImageEval> evals;
  evals.reserve(scope.records.size());
  for (const auto* rec : scope.records) {
    evals.push_back(evaluate_record(*rec, matcher, options.policy));
  }
  return aggregate(std::move(evals), options.slice, scope.n_skipped);
}

double object_count_stats(const ChairReport& baseline, const ChairReport& candidate) {
  return baseline.mean_objects_per_caption() - candidate.mean_objects_per_caption();
}

// ---------------------------------------------------------------------------
// Comparison

ChairSummary summarize(const ChairReport& report) {
  ChairSummary s;
  s.chair_i = report.chair_i.value();
  s.chair_s = report.chair_s.value();
  s.n_sentences = report.n_sentences;
  s.mean_objects_per_caption = report.mean_objects_per_caption();
  return s;
}

ChairSummary summary_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::Format, "report must be a JSON object");
  auto number = [&](const char* key) -> std::optional<double> {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return std::nullopt;
    if (!it->is_number()) throw Error(ErrorCode::Format, std::string("report field '") + key + "' must be a number");
    return it->get<double>();
  };
  auto ratio = [&](const char* key) -> std::optional<double> {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_array() || it->size() != 2) return std::nullopt;
    const auto num = (*it)[0].get<double>();
    const auto den = (*it)[1].get<double>();
    return den == 0 ? 0.0 : num / den;
  };

  ChairSummary s;
  auto ci = ratio("chair_i_ratio");
  auto cs = ratio("chair_s_ratio");
  if (!ci) {
    auto pct = number("chair_i");
    if (!pct) throw Error(ErrorCode::Format, "report has no 'chair_i'");
    ci = *pct / 100.0;
  }
  if (!cs) {
    auto pct = number("chair_s");
    if (!pct) throw Error(ErrorCode::Format, "report has no 'chair_s'");
    cs = *pct / 100.0;
  }
  s.chair_i = *ci;
  s.chair_s = *cs;
  if (auto n = number("n_sentences")) s.n_sentences = static_cast<std::uint64_t>(*n);
  s.mean_objects_per_caption = number("mean_objects_per_caption");
  return s;
}

ComparisonReport compare(const ChairSummary& baseline, const ChairSummary& candidate) {
  ComparisonReport out;
  out.baseline = baseline;
  out.candidate = candidate;
  out.delta_chair_i = 100.0 * (candidate.chair_i - baseline.chair_i);
  out.delta_chair_s = 100.0 * (candidate.chair_s - baseline.chair_s);
  if (baseline.chair_s > 0.0) {
    out.relative_reduction_chair_s =
        100.0 * (baseline.chair_s - candidate.chair_s) / baseline.chair_s;
  } else {
    out.notes.push_back("baseline CHAIR_s is zero; relative reduction undefined");
  }
  if (baseline.n_sentences && candidate.n_sentences &&
      *baseline.n_sentences != *candidate.n_sentences) {
    out.notes.push_back("reports cover different numbers of sentences (" +
                        std::to_string(*baseline.n_sentences) + " vs " +
                        std::to_string(*candidate.n_sentences) + ")");
  }
  return out;
}

ComparisonReport compare(const ChairReport& baseline, const ChairReport& candidate) {
  return compare(summarize(baseline), summarize(candidate));
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const ImageEval& eval) {
  nlohmann::json out = {
      {"image_id", eval.image_id.to_json()},
      {"predicted_objects", string_set(eval.predicted_objects)},
      {"hallucinated", string_set(eval.hallucinated)},
      {"gt_objects", string_set(eval.gt_objects)},
      {"n_mentions", eval.n_mentions},
  };
  if (eval.domain) out["domain"] = std::string(to_string(*eval.domain));
  return out;
}

nlohmann::json to_json(const ChairReport& report, bool include_per_image) {
  nlohmann::json out = {
      {"chair_i", report.chair_i.percent()},
      {"chair_s", report.chair_s.percent()},
      {"chair_i_ratio", {report.chair_i.num, report.chair_i.den}},
      {"chair_s_ratio", {report.chair_s.num, report.chair_s.den}},
      {"n_sentences", report.n_sentences},
      {"n_objects_total", report.n_objects_total},
      {"n_hallucinated_objects", report.n_hallucinated_objects},
      {"n_hallucinated_sentences", report.n_hallucinated_sentences},
      {"n_mentions_total", report.n_mentions_total},
      {"mean_objects_per_caption", report.mean_objects_per_caption()},
      {"n_skipped", report.n_skipped},
      {"zero_object_corpus", report.zero_object_corpus},
  };
  out["slice"] = report.slice ? nlohmann::json(std::string(to_string(*report.slice)))
                              : nlohmann::json();
  if (include_per_image) {
    nlohmann::json images = nlohmann::json::array();
    for (const auto& e : report.per_image) images.push_back(to_json(e));
    out["per_image"] = std::move(images);
  }
  return out;
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json out = {
      {"baseline", summary_json(report.baseline)},
      {"candidate", summary_json(report.candidate)},
      {"delta_chair_i", round_tenth(report.delta_chair_i)},
      {"delta_chair_s", round_tenth(report.delta_chair_s)},
      {"notes", report.notes},
  };
  out["relative_reduction_chair_s"] = report.relative_reduction_chair_s
                                          ? nlohmann::json(round_tenth(*report.relative_reduction_chair_s))
                                          : nlohmann::json();
  return out;
}

std::string to_csv(const ChairReport& report) {
  std::ostringstream out;
  out << "chair_i,chair_s,n_sentences,n_objects_total,n_hallucinated_objects,"
         "n_hallucinated_sentences,n_mentions_total,mean_objects_per_caption,n_skipped,slice\n";
  const auto tenths = [](std::int64_t t) {
    return std::to_string(t / 10) + "." + std::to_string(t % 10);
  };
  char mean[32];
  std::snprintf(mean, sizeof(mean), "%.4f", report.mean_objects_per_caption());
  out << tenths(report.chair_i.percent_tenths()) << ',' << tenths(report.chair_s.percent_tenths())
      << ',' << report.n_sentences << ',' << report.n_objects_total << ','
      << report.n_hallucinated_objects << ',' << report.n_hallucinated_sentences << ','
      << report.n_mentions_total << ',' << mean << ',' << report.n_skipped << ','
      << (report.slice ? std::string(to_string(*report.slice)) : std::string()) << '\n';
  return out.str();
}

}  // namespace chair
