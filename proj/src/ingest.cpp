#include "chair/ingest.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>

#include "chair/error.hpp"
#include "io_util.hpp"

namespace chair {

namespace {

bool is_canonical_integer(const std::string& s) {
  if (s.empty() || s.size() > 19) return false;
  if (!std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  return s.size() == 1 || s.front() != '0';
}

const nlohmann::json& require_array(const nlohmann::json& doc, const char* key,
                                    const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_array()) {
    throw Error(ErrorCode::Format, where + ": missing '" + key + "' array");
  }
  return *it;
}

const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                    const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::Format, where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorCode::Format, where + ": missing field '" + key + "'");
  }
  return *it;
}

std::string require_string(const nlohmann::json& obj, const char* key,
                           const std::string& where) {
  const auto& v = require_field(obj, key, where);
  if (!v.is_string()) {
    throw Error(ErrorCode::Format, where + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

struct Reference {
  std::optional<std::int64_t> annotation_id;
  std::string caption;

  friend bool operator<(const Reference& a, const Reference& b) {
    return std::tie(a.annotation_id, a.caption) < std::tie(b.annotation_id, b.caption);
  }
};

// image id -> references, sorted so that the result does not depend on the
// order of the annotation array.
std::map<ImageId, std::vector<Reference>> group_captions(const nlohmann::json& annotations,
                                                         const std::set<ImageId>& known,
                                                         const std::string& where) {
  std::map<ImageId, std::vector<Reference>> out;
  for (const auto& ann : annotations) {
    ImageId id = ImageId::from_json(require_field(ann, "image_id", where));
    if (!known.contains(id)) {
      throw Error(ErrorCode::Integrity,
                  where + ": annotation refers to unknown image " + id.text());
    }
    Reference ref;
    ref.caption = require_string(ann, "caption", where);
    if (auto it = ann.find("id"); it != ann.end() && it->is_number_integer()) {
      ref.annotation_id = it->get<std::int64_t>();
    }
    out[id].push_back(std::move(ref));
  }
  for (auto& [id, refs] : out) std::sort(refs.begin(), refs.end());
  return out;
}

std::vector<std::string> captions_of(const std::vector<Reference>& refs) {
  std::vector<std::string> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(r.caption);
  return out;
}

void extract_into(const CaptionRecord& record, const ObjectMatcher& matcher,
                  GroundTruthObjects& gt) {
  for (const auto& ref : record.references) {
    for (auto& m : matcher.extract(ref)) {
      gt.objects.emplace(std::move(m.category), Provenance::FromReferences);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

ImageId ImageId::from_json(const nlohmann::json& value) {
  if (value.is_number_unsigned()) return ImageId(std::to_string(value.get<std::uint64_t>()));
  if (value.is_number_integer()) return ImageId(std::to_string(value.get<std::int64_t>()));
  if (value.is_string()) return ImageId(value.get<std::string>());
  throw Error(ErrorCode::Format, "image_id must be an integer or a string, got " + value.dump());
}

bool ImageId::is_numeric() const { return is_canonical_integer(text_); }

nlohmann::json ImageId::to_json() const {
  if (is_numeric()) return std::stoull(text_);
  return text_;
}

std::strong_ordering operator<=>(const ImageId& a, const ImageId& b) {
  const bool an = a.is_numeric();
  const bool bn = b.is_numeric();
  if (an != bn) return an ? std::strong_ordering::less : std::strong_ordering::greater;
  if (an && a.text_.size() != b.text_.size()) return a.text_.size() <=> b.text_.size();
  return a.text_ <=> b.text_;
}

std::string_view to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::InDomain: return "in-domain";
    case DomainTag::NearDomain: return "near-domain";
    case DomainTag::OutOfDomain: return "out-domain";
  }
  return "in-domain";
}

std::optional<DomainTag> parse_domain_tag(std::string_view text) {
  if (text == "in-domain" || text == "in") return DomainTag::InDomain;
  if (text == "near-domain" || text == "near") return DomainTag::NearDomain;
  if (text == "out-domain" || text == "out-of-domain" || text == "out") {
    return DomainTag::OutOfDomain;
  }
  return std::nullopt;
}

std::string_view to_string(GroundTruthPolicy policy) {
  switch (policy) {
    case GroundTruthPolicy::ReferencesOnly: return "references";
    case GroundTruthPolicy::InstancesOnly: return "instances";
    case GroundTruthPolicy::Union: return "union";
  }
  return "union";
}

std::optional<GroundTruthPolicy> parse_policy(std::string_view text) {
  if (text == "references") return GroundTruthPolicy::ReferencesOnly;
  if (text == "instances") return GroundTruthPolicy::InstancesOnly;
  if (text == "union") return GroundTruthPolicy::Union;
  return std::nullopt;
}

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::FromReferences: return "references";
    case Provenance::FromInstances: return "instances";
    case Provenance::Both: return "both";
  }
  return "both";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train" || text == "restval") return Split::Train;
  if (text == "val") return Split::Val;
  if (text == "test") return Split::Test;
  return std::nullopt;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  return detail::read_json_file(path);
}

// ---------------------------------------------------------------------------
// COCO / Karpathy

std::vector<CaptionRecord> load_coco_captions(const std::filesystem::path& annotations_path,
                                              const std::filesystem::path& split_path,
                                              Split split) {
  const std::string split_where = split_path.string();
  const auto split_doc = detail::read_json_file(split_path);

  std::set<ImageId> in_split;
  std::map<ImageId, std::vector<Reference>> karpathy_refs;
  if (split_doc.is_object() && split_doc.contains("images")) {
    for (const auto& img : require_array(split_doc, "images", split_where)) {
      const nlohmann::json* id_field = nullptr;
      for (const char* key : {"cocoid", "id", "imgid"}) {
        if (auto it = img.find(key); it != img.end()) {
          id_field = &*it;
          break;
        }
      }
      if (id_field == nullptr) {
        throw Error(ErrorCode::Format, split_where + ": image entry without 'cocoid'/'id'");
      }
      ImageId id = ImageId::from_json(*id_field);
      auto which = parse_split(require_string(img, "split", split_where));
      if (!which) throw Error(ErrorCode::Format, split_where + ": unknown split name");
      if (*which != split) continue;
      in_split.insert(id);
      if (auto s = img.find("sentences"); s != img.end() && s->is_array()) {
        auto& refs = karpathy_refs[id];
        for (const auto& sent : *s) {
          if (auto raw = sent.find("raw"); raw != sent.end() && raw->is_string()) {
            refs.push_back({std::nullopt, raw->get<std::string>()});
          }
        }
      }
    }
  } else if (split_doc.is_object()) {
    for (const auto& [key, value] : split_doc.items()) {
      if (!value.is_string()) {
        throw Error(ErrorCode::Format, split_where + ": split of " + key + " must be a string");
      }
      auto which = parse_split(value.get<std::string>());
      if (!which) throw Error(ErrorCode::Format, split_where + ": unknown split name");
      if (*which == split) in_split.insert(ImageId(key));
    }
  } else {
    throw Error(ErrorCode::Format, split_where + ": unrecognized split file layout");
  }

  std::map<ImageId, std::vector<Reference>> refs;
  if (!annotations_path.empty()) {
    const std::string where = annotations_path.string();
    const auto doc = detail::read_json_file(annotations_path);
    std::set<ImageId> known;
    for (const auto& img : require_array(doc, "images", where)) {
      known.insert(ImageId::from_json(require_field(img, "id", where)));
    }
    refs = group_captions(require_array(doc, "annotations", where), known, where);
  } else {
    refs = std::move(karpathy_refs);
  }

  std::vector<CaptionRecord> records;
  records.reserve(in_split.size());
  for (const auto& id : in_split) {
    auto it = refs.find(id);
    if (it == refs.end() || it->second.empty()) {
      if (split == Split::Train) continue;
      throw Error(ErrorCode::Integrity, "image " + id.text() + " has no reference captions");
    }
    CaptionRecord rec;
    rec.image_id = id;
    rec.references = captions_of(it->second);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CaptionRecord> load_nocaps(const std::filesystem::path& path) {
  const std::string where = path.string();
  const auto doc = detail::read_json_file(path);
  std::set<ImageId> known;
  std::map<ImageId, std::optional<DomainTag>> domains;
  for (const auto& img : require_array(doc, "images", where)) {
    ImageId id = ImageId::from_json(require_field(img, "id", where));
    std::optional<DomainTag> tag;
    if (auto d = img.find("domain"); d != img.end() && d->is_string()) {
      tag = parse_domain_tag(d->get<std::string>());
      if (!tag) throw Error(ErrorCode::Format, where + ": unknown domain '" + d->get<std::string>() + "'");
    }
    known.insert(id);
    domains[id] = tag;
  }
  auto refs = group_captions(require_array(doc, "annotations", where), known, where);

  std::vector<CaptionRecord> records;
  records.reserve(known.size());
  for (const auto& id : known) {
    auto it = refs.find(id);
    if (it == refs.end() || it->second.empty()) {
      throw Error(ErrorCode::Integrity, "image " + id.text() + " has no reference captions");
    }
    CaptionRecord rec;
    rec.image_id = id;
    rec.references = captions_of(it->second);
    rec.domain = domains[id];
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Generic records

std::vector<CaptionRecord> parse_generic_records(const nlohmann::json& doc,
                                                 const CategorySet* vocab) {
  if (!doc.is_array()) throw Error(ErrorCode::Format, "records must be a JSON array");
  std::vector<CaptionRecord> records;
  records.reserve(doc.size());
  std::size_t index = 0;
  for (const auto& item : doc) {
    const std::string where = "record " + std::to_string(index++);
    CaptionRecord rec;
    rec.image_id = ImageId::from_json(require_field(item, "image_id", where));
    if (auto it = item.find("references"); it != item.end()) {
      if (!it->is_array()) throw Error(ErrorCode::Format, where + ": 'references' must be an array");
      for (const auto& r : *it) {
        if (!r.is_string()) throw Error(ErrorCode::Format, where + ": references must be strings");
        rec.references.push_back(r.get<std::string>());
      }
    }
    if (auto it = item.find("prediction"); it != item.end() && !it->is_null()) {
      if (!it->is_string()) throw Error(ErrorCode::Format, where + ": 'prediction' must be a string");
      rec.prediction = it->get<std::string>();
    }
    if (auto it = item.find("instance_objects"); it != item.end() && !it->is_null()) {
      if (!it->is_array()) {
        throw Error(ErrorCode::Format, where + ": 'instance_objects' must be an array");
      }
      std::set<std::string> objects;
      for (const auto& o : *it) {
        if (!o.is_string()) throw Error(ErrorCode::Format, where + ": instance objects must be strings");
        std::string name = normalize_name(o.get<std::string>());
        if (vocab != nullptr) {
          auto coarse = vocab->coarse_of(name);
          if (!coarse) {
            throw Error(ErrorCode::Integrity, where + ": instance object '" + name +
                                                  "' is not in the vocabulary");
          }
          name = *coarse;
        }
        objects.insert(std::move(name));
      }
      rec.instance_objects = std::move(objects);
    }
    if (auto it = item.find("domain"); it != item.end() && it->is_string()) {
      rec.domain = parse_domain_tag(it->get<std::string>());
      if (!rec.domain) throw Error(ErrorCode::Format, where + ": unknown domain");
    }
    records.push_back(std::move(rec));
  }
  check_unique_ids(records);
  return records;
}

std::vector<CaptionRecord> load_generic_records(const std::filesystem::path& path,
                                                const CategorySet* vocab) {
  auto in = detail::open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  try {
    if (first != std::string::npos && text[first] == '[') {
      return parse_generic_records(nlohmann::json::parse(text), vocab);
    }
    nlohmann::json array = nlohmann::json::array();
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      array.push_back(nlohmann::json::parse(line));
    }
    return parse_generic_records(array, vocab);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Instances / predictions

std::map<ImageId, std::set<std::string>> parse_instances(const nlohmann::json& doc,
                                                         const CategorySet& vocab,
                                                         std::vector<std::string>* warnings) {
  const std::string where = "instances";
  std::unordered_map<std::int64_t, std::optional<std::string>> categories;
  for (const auto& cat : require_array(doc, "categories", where)) {
    const auto& id = require_field(cat, "id", where);
    if (!id.is_number_integer()) throw Error(ErrorCode::Format, where + ": category id must be an integer");
    const std::string name = normalize_name(require_string(cat, "name", where));
    auto coarse = vocab.coarse_of(name);
    if (!coarse && warnings != nullptr) {
      warnings->push_back("instance category '" + name + "' has no coarse category; ignored");
    }
    categories[id.get<std::int64_t>()] = coarse;
  }
  std::map<ImageId, std::set<std::string>> out;
  for (const auto& ann : require_array(doc, "annotations", where)) {
    ImageId image = ImageId::from_json(require_field(ann, "image_id", where));
    const auto& cid = require_field(ann, "category_id", where);
    if (!cid.is_number_integer()) throw Error(ErrorCode::Format, where + ": category_id must be an integer");
    auto it = categories.find(cid.get<std::int64_t>());
    if (it == categories.end()) {
      throw Error(ErrorCode::Integrity, where + ": unknown category_id " + cid.dump() +
                                            " on image " + image.text());
    }
    if (it->second) out[image].insert(*it->second);
  }
  return out;
}

std::map<ImageId, std::set<std::string>> load_instances(const std::filesystem::path& instances_path,
                                                        const CategorySet& vocab,
                                                        std::vector<std::string>* warnings) {
  return parse_instances(detail::read_json_file(instances_path), vocab, warnings);
}

std::map<ImageId, std::string> parse_predictions(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::Format, "predictions must be a JSON array");
  std::map<ImageId, std::string> out;
  std::size_t index = 0;
  for (const auto& item : doc) {
    const std::string where = "prediction " + std::to_string(index++);
    ImageId id = ImageId::from_json(require_field(item, "image_id", where));
    const auto& caption = require_field(item, "caption", where);
    if (!caption.is_string()) {
      throw Error(ErrorCode::Format, where + ": caption of image " + id.text() + " is not a string");
    }
    if (!out.emplace(id, caption.get<std::string>()).second) {
      throw Error(ErrorCode::Format, "duplicate prediction for image " + id.text());
    }
  }
  return out;
}

std::map<ImageId, std::string> load_predictions(const std::filesystem::path& path,
                                                bool json_lines) {
  if (!json_lines) return parse_predictions(detail::read_json_file(path));
  auto in = detail::open_input(path);
  nlohmann::json array = nlohmann::json::array();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      array.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return parse_predictions(array);
}

// ---------------------------------------------------------------------------
// Joins and ground truth

void check_unique_ids(const std::vector<CaptionRecord>& records) {
  std::set<ImageId> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.image_id).second) {
      throw Error(ErrorCode::Integrity, "duplicate image_id " + r.image_id.text());
    }
  }
}

JoinReport attach_predictions(std::vector<CaptionRecord>& records,
                              const std::map<ImageId, std::string>& predictions) {
  JoinReport report;
  std::set<ImageId> ids;
  for (auto& rec : records) {
    ids.insert(rec.image_id);
    if (auto it = predictions.find(rec.image_id); it != predictions.end()) {
      rec.prediction = it->second;
    } else {
      report.records_without_prediction.push_back(rec.image_id);
    }
  }
  for (const auto& [id, caption] : predictions) {
    if (!ids.contains(id)) report.unknown_predictions.push_back(id);
  }
  if (!report.unknown_predictions.empty()) {
    std::string msg = std::to_string(report.unknown_predictions.size()) +
                      " prediction(s) name images outside the corpus:";
    for (std::size_t i = 0; i < report.unknown_predictions.size() && i < 10; ++i) {
      msg += " " + report.unknown_predictions[i].text();
    }
    throw Error(ErrorCode::Integrity, msg);
  }
  return report;
}

void attach_instances(std::vector<CaptionRecord>& records,
                      const std::map<ImageId, std::set<std::string>>& instances) {
  for (auto& rec : records) {
    auto it = instances.find(rec.image_id);
    rec.instance_objects = it == instances.end() ? std::set<std::string>{} : it->second;
  }
}

GroundTruthObjects ground_truth_objects(const CaptionRecord& record,
                                        const ObjectMatcher& matcher,
                                        GroundTruthPolicy policy) {
  GroundTruthObjects gt;
  gt.image_id = record.image_id;
  const bool use_refs = policy != GroundTruthPolicy::InstancesOnly;
  const bool use_instances = policy != GroundTruthPolicy::ReferencesOnly;

  if (use_refs && record.references.empty()) {
    throw Error(ErrorCode::Integrity,
                "image " + record.image_id.text() + " has no reference captions");
  }
  if (policy == GroundTruthPolicy::InstancesOnly && !record.instance_objects) {
    throw Error(ErrorCode::Config, "image " + record.image_id.text() +
                                       " has no instance labels but the policy is instances-only");
  }
  if (use_refs) extract_into(record, matcher, gt);
  if (use_instances && record.instance_objects) {
    for (const auto& obj : *record.instance_objects) {
      auto [it, inserted] = gt.objects.emplace(obj, Provenance::FromInstances);
      if (!inserted) it->second = Provenance::Both;
    }
  }
  return gt;
}

GroundTruthObjects ground_truth_objects(const CaptionRecord& record, const CategorySet& vocab,
                                        GroundTruthPolicy policy) {
  return ground_truth_objects(record, ObjectMatcher(vocab), policy);
}

}  // namespace chair
