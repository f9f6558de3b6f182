#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "chair/textnorm.hpp"
#include "chair/vocab.hpp"

namespace chair {

/// Opaque image identifier. JSON integers and strings are both accepted;
/// canonical decimal integers order numerically and serialize back as
/// numbers.
class ImageId {
 public:
  ImageId() = default;
  explicit ImageId(std::string text) : text_(std::move(text)) {}

  static ImageId from_json(const nlohmann::json& value);
  nlohmann::json to_json() const;

  const std::string& text() const { return text_; }
  bool is_numeric() const;

  friend bool operator==(const ImageId& a, const ImageId& b) { return a.text_ == b.text_; }
  friend std::strong_ordering operator<=>(const ImageId& a, const ImageId& b);

 private:
  std::string text_;
};

enum class DomainTag { InDomain, NearDomain, OutOfDomain };

std::string_view to_string(DomainTag tag);
/// Accepts "in-domain", "near-domain", "out-domain" and the short forms
/// "in", "near", "out".
std::optional<DomainTag> parse_domain_tag(std::string_view text);

struct CaptionRecord {
  ImageId image_id;
  std::vector<std::string> references;
  std::optional<std::string> prediction;
  std::optional<std::set<std::string>> instance_objects;
  std::optional<DomainTag> domain;
};

enum class GroundTruthPolicy { ReferencesOnly, InstancesOnly, Union };

std::string_view to_string(GroundTruthPolicy policy);
std::optional<GroundTruthPolicy> parse_policy(std::string_view text);

enum class Provenance { FromReferences, FromInstances, Both };

std::string_view to_string(Provenance provenance);

struct GroundTruthObjects {
  ImageId image_id;
  std::map<std::string, Provenance> objects;

  bool contains(const std::string& category) const { return objects.contains(category); }
};

/// Karpathy split name. "restval" images count as "train".
enum class Split { Train, Val, Test };

std::optional<Split> parse_split(std::string_view text);

/// Loads one split of a COCO caption corpus. `annotations_path` is the COCO
/// captions JSON; `split_path` is either the Karpathy `dataset_coco.json`
/// (`images[].{cocoid, split}`) or a flat `{"<image_id>": "test", ...}`
/// object. When `annotations_path` is empty the references are taken from
/// the Karpathy file's `sentences[].raw`.
std::vector<CaptionRecord> load_coco_captions(const std::filesystem::path& annotations_path,
                                              const std::filesystem::path& split_path,
                                              Split split = Split::Test);

/// NoCaps caption JSON (`images[].{id, domain}`, `annotations[].{image_id,
/// caption}`).
std::vector<CaptionRecord> load_nocaps(const std::filesystem::path& path);

/// Generic corpus: JSON array (or JSON lines) of `{image_id, references,
/// prediction?, instance_objects?, domain?}`.
std::vector<CaptionRecord> parse_generic_records(const nlohmann::json& doc,
                                                 const CategorySet* vocab = nullptr);
std::vector<CaptionRecord> load_generic_records(const std::filesystem::path& path,
                                                const CategorySet* vocab = nullptr);

/// Per-image coarse categories from a COCO instances JSON; category names
/// pass through `vocab.fine_to_coarse`. Names with no coarse category are
/// dropped and reported in `warnings` when given.
std::map<ImageId, std::set<std::string>> load_instances(
    const std::filesystem::path& instances_path, const CategorySet& vocab,
    std::vector<std::string>* warnings = nullptr);
std::map<ImageId, std::set<std::string>> parse_instances(
    const nlohmann::json& doc, const CategorySet& vocab,
    std::vector<std::string>* warnings = nullptr);

/// `[{image_id, caption}, ...]`, or one such object per line when
/// `json_lines` is set. Duplicate ids are rejected.
std::map<ImageId, std::string> load_predictions(const std::filesystem::path& path,
                                                bool json_lines = false);
std::map<ImageId, std::string> parse_predictions(const nlohmann::json& doc);

struct JoinReport {
  std::vector<ImageId> records_without_prediction;
  std::vector<ImageId> unknown_predictions;
};

/// Attaches predictions to records. Throws an integrity error when a
/// prediction names an image that is not in the corpus.
JoinReport attach_predictions(std::vector<CaptionRecord>& records,
                              const std::map<ImageId, std::string>& predictions);

/// Attaches instance label sets; records missing from `instances` get an
/// empty set.
void attach_instances(std::vector<CaptionRecord>& records,
                      const std::map<ImageId, std::set<std::string>>& instances);

/// Throws if image ids repeat.
void check_unique_ids(const std::vector<CaptionRecord>& records);

GroundTruthObjects ground_truth_objects(const CaptionRecord& record,
                                        const ObjectMatcher& matcher,
                                        GroundTruthPolicy policy);
GroundTruthObjects ground_truth_objects(const CaptionRecord& record,
                                        const CategorySet& vocab,
                                        GroundTruthPolicy policy);

nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace chair
