#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace chair {

enum class VocabSource { CocoSynonyms, OpenImagesHierarchy, Merged };

std::string_view to_string(VocabSource source);

/// Lowercase, trim and collapse internal whitespace to single spaces.
std::string normalize_name(std::string_view name);

/// Coarse object vocabulary plus the fine-grained -> coarse mapping.
///
/// Immutable once built. Every coarse category maps to itself and every
/// mapped value is a category; `create` rejects anything else.
class CategorySet {
 public:
  CategorySet() = default;

  static CategorySet create(std::vector<std::string> categories,
                            std::map<std::string, std::string> fine_to_coarse,
                            VocabSource source);

  const std::vector<std::string>& categories() const { return categories_; }
  const std::map<std::string, std::string>& fine_to_coarse() const {
    return fine_to_coarse_;
  }
  VocabSource source() const { return source_; }

  bool empty() const { return categories_.empty(); }
  std::size_t size() const { return categories_.size(); }
  bool contains_category(std::string_view name) const;

  /// Coarse category for a (normalized) fine-grained surface form.
  std::optional<std::string> coarse_of(std::string_view fine) const;

 private:
  std::vector<std::string> categories_;
  std::map<std::string, std::string> fine_to_coarse_;
  VocabSource source_ = VocabSource::Merged;
};

bool operator==(const CategorySet& a, const CategorySet& b);

struct HierarchyNode {
  std::string name;
  std::vector<HierarchyNode> children;
};

/// A vocabulary together with the non-fatal diagnostics produced while
/// building it.
struct VocabBuild {
  CategorySet vocab;
  std::vector<std::string> warnings;
};

// Synonym lexicon: one coarse category per line, followed by comma
// separated synonyms. '#' starts a comment.
CategorySet parse_synonym_lexicon(std::istream& in,
                                  std::string_view source_name = "<stream>");
CategorySet load_synonym_lexicon(const std::filesystem::path& path);

/// Open Images class-descriptions CSV (`LabelName,DisplayName`).
std::map<std::string, std::string> load_class_descriptions(
    const std::filesystem::path& path);

/// Accepts both the Open Images shape (`LabelName` + nested `Subcategory`,
/// `Part` arrays ignored) and the `{name, children}` fixture shape. Labels
/// are resolved through `label_names` when given.
HierarchyNode parse_hierarchy_json(
    const nlohmann::json& doc,
    const std::map<std::string, std::string>* label_names = nullptr);
HierarchyNode load_hierarchy(
    const std::filesystem::path& path,
    const std::optional<std::filesystem::path>& class_descriptions = {});

/// Coarsens a class hierarchy. Kept categories are the non-root nodes that
/// have children plus the childless direct children of the root; every
/// other class maps to its nearest kept ancestor. A class listed under
/// several parents resolves through its first occurrence in document order
/// and produces a warning.
VocabBuild build_coarse_categories(const HierarchyNode& hierarchy);

/// Union of two vocabularies. On conflicting fine-grained mappings `a` wins
/// and the conflict is reported as a warning.
VocabBuild merge(const CategorySet& a, const CategorySet& b);

nlohmann::json to_json(const CategorySet& vocab);
CategorySet category_set_from_json(const nlohmann::json& doc);
CategorySet load_vocab_json(const std::filesystem::path& path);

}  // namespace chair
