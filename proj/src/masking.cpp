#include "chair/masking.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include <omp.h>

#include "chair/error.hpp"

namespace chair {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Job {
  const CaptionRecord* record;
  const std::string* caption;
};

std::vector<Job> corpus_jobs(const std::vector<CaptionRecord>& records) {
  std::vector<const CaptionRecord*> ordered;
  ordered.reserve(records.size());
  for (const auto& r : records) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const CaptionRecord* a, const CaptionRecord* b) { return a->image_id < b->image_id; });
  std::vector<Job> jobs;
  for (const auto* r : ordered) {
    for (const auto& ref : r->references) jobs.push_back({r, &ref});
  }
  return jobs;
}

MaskedExample mask_one(const Job& job, const ObjectMatcher& matcher, const MaskingConfig& cfg) {
  if (cfg.mode == MaskMode::ObjMLM) return mask_objmlm(*job.record, *job.caption, matcher, cfg);
  return mask_standard(job.record->image_id, *job.caption, cfg);
}

}  // namespace

std::string_view to_string(MaskMode mode) {
  return mode == MaskMode::ObjMLM ? "objmlm" : "standard";
}

std::optional<MaskMode> parse_mask_mode(std::string_view text) {
  if (text == "objmlm" || text == "obj-mlm") return MaskMode::ObjMLM;
  if (text == "standard" || text == "mlm") return MaskMode::StandardMLM;
  return std::nullopt;
}

void MaskingConfig::validate() const {
  if (!(mlm_rate > 0.0 && mlm_rate <= 1.0)) {
    throw Error(ErrorCode::Config, "mlm_rate must be in (0, 1], got " + std::to_string(mlm_rate));
  }
  if (mask_token.empty()) throw Error(ErrorCode::Config, "mask_token must be non-empty");
  if (mask_token.find_first_of(" \t\r\n") != std::string::npos) {
    throw Error(ErrorCode::Config, "mask_token must not contain whitespace");
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t example_seed(std::uint64_t seed, const ImageId& image_id, std::string_view caption) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ fnv1a64(image_id.text()));
  s = splitmix64(s ^ fnv1a64(caption));
  return s;
}

MaskedExample mask_objmlm(const CaptionRecord& record, std::string_view caption,
                          const ObjectMatcher& matcher, const MaskingConfig& cfg) {
  cfg.validate();
  const auto tokens = tokenize(caption);
  const auto mentions = matcher.extract(tokens);

  std::optional<std::set<std::string>> allowed;
  if (cfg.restrict_to_image_objects) {
    if (record.instance_objects) {
      allowed = *record.instance_objects;
    } else if (!record.references.empty()) {
      allowed.emplace();
      for (const auto& [name, provenance] :
           ground_truth_objects(record, matcher, GroundTruthPolicy::ReferencesOnly).objects) {
        allowed->insert(name);
      }
    }
  }

  MaskedExample out;
  out.image_id = record.image_id;
  std::size_t position = 0;
  std::size_t next_mention = 0;
  auto emit = [&](std::string_view word) {
    if (position > 0) out.masked_text.push_back(' ');
    out.masked_text += word;
    ++position;
  };
  for (std::size_t i = 0; i < tokens.size();) {
    while (next_mention < mentions.size() && mentions[next_mention].first_token < i) ++next_mention;
    if (next_mention < mentions.size() && mentions[next_mention].first_token == i) {
      const auto& m = mentions[next_mention];
      if (!allowed || allowed->contains(m.category)) {
        out.targets.emplace_back(position, m.surface);
        emit(cfg.mask_token);
        i = m.last_token + 1;
        continue;
      }
    }
    emit(tokens[i].lower);
    ++i;
  }
  out.n_masked_units = out.targets.size();
  return out;
}

MaskedExample mask_standard(const ImageId& image_id, std::string_view caption,
                            const MaskingConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(example_seed(cfg.seed, image_id, caption));
  MaskedExample out;
  out.image_id = image_id;
  std::size_t position = 0;
  for (const auto& tok : tokenize(caption)) {
    // 53-bit uniform in [0, 1); avoids distribution classes whose output
    // differs between standard libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (position > 0) out.masked_text.push_back(' ');
    if (u < cfg.mlm_rate) {
      out.targets.emplace_back(position, tok.lower);
      out.masked_text += cfg.mask_token;
    } else {
      out.masked_text += tok.lower;
    }
    ++position;
  }
  out.n_masked_units = out.targets.size();
  return out;
}

std::string reconstruct(const MaskedExample& example, std::string_view mask_token) {
  std::vector<std::string> words;
  std::istringstream in(example.masked_text);
  std::string w;
  while (in >> w) words.push_back(std::move(w));
  for (const auto& [pos, original] : example.targets) {
    if (pos >= words.size() || words[pos] != mask_token) {
      throw Error(ErrorCode::Format, "target position " + std::to_string(pos) +
                                         " does not hold a mask token");
    }
    words[pos] = original;
  }
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::vector<MaskedExample> mask_corpus(const std::vector<CaptionRecord>& records,
                                       const ObjectMatcher& matcher, const MaskingConfig& cfg,
                                       int workers) {
  cfg.validate();
  check_unique_ids(records);
  const auto jobs = corpus_jobs(records);
  std::vector<MaskedExample> out(jobs.size());
  const auto n = static_cast<std::int64_t>(jobs.size());
  const int threads = workers > 0 ? workers : omp_get_max_threads();
  std::exception_ptr failure;
  std::mutex failure_mutex;

#pragma omp parallel for num_threads(threads) schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      out[i] = mask_one(jobs[i], matcher, cfg);
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<MaskedExample> mask_corpus_reference(const std::vector<CaptionRecord>& records,
                                                 const ObjectMatcher& matcher,
                                                 const MaskingConfig& cfg) {
  cfg.validate();
  check_unique_ids(records);
  std::vector<MaskedExample> out;
  for (const auto& job : corpus_jobs(records)) out.push_back(mask_one(job, matcher, cfg));
  return out;
}

MaskSummary summarize(const std::vector<MaskedExample>& examples) {
  MaskSummary s;
  s.n_examples = examples.size();
  for (const auto& e : examples) s.n_masked_units += e.n_masked_units;
  s.units_per_example =
      s.n_examples == 0 ? 0.0 : static_cast<double>(s.n_masked_units) / s.n_examples;
  return s;
}

nlohmann::json to_json(const MaskedExample& example) {
  nlohmann::json targets = nlohmann::json::array();
  for (const auto& [pos, word] : example.targets) targets.push_back({pos, word});
  return {
      {"image_id", example.image_id.to_json()},
      {"masked_text", example.masked_text},
      {"targets", std::move(targets)},
  };
}

void write_jsonl(std::ostream& out, const std::vector<MaskedExample>& examples) {
  for (const auto& e : examples) out << to_json(e).dump() << '\n';
}

MaskSummary emit_corpus(const std::vector<CaptionRecord>& records, const ObjectMatcher& matcher,
                        const MaskingConfig& cfg, const std::filesystem::path& out_path,
                        int workers) {
  const auto examples = mask_corpus(records, matcher, cfg, workers);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path.string());
  write_jsonl(out, examples);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + out_path.string());
  return summarize(examples);
}

}  // namespace chair
