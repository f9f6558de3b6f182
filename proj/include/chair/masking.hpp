#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chair/ingest.hpp"
#include "chair/textnorm.hpp"

namespace chair {

enum class MaskMode { ObjMLM, StandardMLM };

std::string_view to_string(MaskMode mode);
std::optional<MaskMode> parse_mask_mode(std::string_view text);

struct MaskingConfig {
  MaskMode mode = MaskMode::ObjMLM;
  double mlm_rate = 0.15;                  // StandardMLM only
  bool restrict_to_image_objects = false;  // ObjMLM only
  std::string mask_token = "[MASK]";
  std::uint64_t seed = 0;

  /// Throws a config error naming the offending field.
  void validate() const;
};

/// A caption with masks applied. `masked_text` is the normalized caption
/// (lowercased tokens, single spaces) with each masked unit replaced by a
/// single mask token; `targets` holds (word position in masked_text,
/// original words).
struct MaskedExample {
  ImageId image_id;
  std::string masked_text;
  std::vector<std::pair<std::size_t, std::string>> targets;
  std::size_t n_masked_units = 0;

  friend bool operator==(const MaskedExample&, const MaskedExample&) = default;
};

/// Whole-object masking: each object mention found by the matcher becomes
/// exactly one mask token, whatever its word count. With
/// `restrict_to_image_objects`, only mentions whose category is in the
/// record's ground truth are masked; instance labels are used when present,
/// otherwise the references.
MaskedExample mask_objmlm(const CaptionRecord& record, std::string_view caption,
                          const ObjectMatcher& matcher, const MaskingConfig& cfg);

/// Word-level masking, each word independently with probability
/// `cfg.mlm_rate`. The generator is seeded from (seed, image_id, caption)
/// so the output does not depend on processing order.
MaskedExample mask_standard(const ImageId& image_id, std::string_view caption,
                            const MaskingConfig& cfg);

/// Puts targets back in place of the mask tokens.
std::string reconstruct(const MaskedExample& example, std::string_view mask_token = "[MASK]");

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t example_seed(std::uint64_t seed, const ImageId& image_id, std::string_view caption);

/// One example per reference caption, ordered by image id and then by
/// reference order. OpenMP-parallel; output is identical for any worker
/// count.
std::vector<MaskedExample> mask_corpus(const std::vector<CaptionRecord>& records,
                                       const ObjectMatcher& matcher, const MaskingConfig& cfg,
                                       int workers = 0);
/// Serial reference for mask_corpus.
std::vector<MaskedExample> mask_corpus_reference(const std::vector<CaptionRecord>& records,
                                                 const ObjectMatcher& matcher,
                                                 const MaskingConfig& cfg);

struct MaskSummary {
  std::size_t n_examples = 0;
  std::size_t n_masked_units = 0;
  double units_per_example = 0.0;
};

MaskSummary summarize(const std::vector<MaskedExample>& examples);

nlohmann::json to_json(const MaskedExample& example);
/// Writes one JSON object per line.
void write_jsonl(std::ostream& out, const std::vector<MaskedExample>& examples);

/// Masks the corpus and writes it to `out_path` as JSON lines.
MaskSummary emit_corpus(const std::vector<CaptionRecord>& records, const ObjectMatcher& matcher,
                        const MaskingConfig& cfg, const std::filesystem::path& out_path,
                        int workers = 0);

}  // namespace chair
