#include "chair/vocab.hpp"

#include <algorithm>
#include <functional>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "chair/error.hpp"
#include "io_util.hpp"

namespace chair {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' ||
         c == '\v';
}

}  // namespace

std::string_view to_string(VocabSource source) {
  switch (source) {
    case VocabSource::CocoSynonyms: return "coco_synonyms";
    case VocabSource::OpenImagesHierarchy: return "open_images_hierarchy";
    case VocabSource::Merged: return "merged";
  }
  return "merged";
}

std::string normalize_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_space = false;
  for (char c : name) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

CategorySet CategorySet::create(std::vector<std::string> categories,
                                std::map<std::string, std::string> fine_to_coarse,
                                VocabSource source) {
  std::set<std::string> seen;
  for (const auto& name : categories) {
    if (name.empty() || name != normalize_name(name)) {
      throw Error(ErrorCode::Structure,
                  "category name is not normalized: '" + name + "'");
    }
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::Structure, "duplicate category: " + name);
    }
    auto [it, inserted] = fine_to_coarse.emplace(name, name);
    if (!inserted && it->second != name) {
      throw Error(ErrorCode::Structure, "category '" + name +
                                            "' maps to '" + it->second +
                                            "' instead of itself");
    }
  }
  for (const auto& [fine, coarse] : fine_to_coarse) {
    if (!seen.contains(coarse)) {
      throw Error(ErrorCode::Structure, "'" + fine + "' maps to unknown category '" +
                                            coarse + "'");
    }
  }
  CategorySet out;
  out.categories_ = std::move(categories);
  out.fine_to_coarse_ = std::move(fine_to_coarse);
  out.source_ = source;
  return out;
}

bool CategorySet::contains_category(std::string_view name) const {
  auto it = fine_to_coarse_.find(std::string(name));
  return it != fine_to_coarse_.end() && it->second == it->first;
}

std::optional<std::string> CategorySet::coarse_of(std::string_view fine) const {
  auto it = fine_to_coarse_.find(std::string(fine));
  if (it == fine_to_coarse_.end()) return std::nullopt;
  return it->second;
}

bool operator==(const CategorySet& a, const CategorySet& b) {
  return a.source() == b.source() && a.categories() == b.categories() &&
         a.fine_to_coarse() == b.fine_to_coarse();
}

// ---------------------------------------------------------------------------
// Synonym lexicon

CategorySet parse_synonym_lexicon(std::istream& in, std::string_view source_name) {
  std::vector<std::string> categories;
  std::map<std::string, std::string> mapping;
  std::map<std::string, std::size_t> defined_on;  // fine form -> line number

  auto bind = [&](const std::string& fine, const std::string& coarse,
                  std::size_t line_no) {
    auto [it, inserted] = mapping.emplace(fine, coarse);
    if (!inserted && it->second != coarse) {
      std::ostringstream msg;
      msg << source_name << ":" << line_no << ": '" << fine
          << "' maps to both '" << it->second << "' (line "
          << defined_on[fine] << ") and '" << coarse << "'";
      throw Error(ErrorCode::Conflict, msg.str());
    }
    if (inserted) defined_on[fine] = line_no;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (normalize_name(line).empty()) continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(normalize_name(field));

    const std::string& coarse = fields.front();
    if (coarse.empty()) {
      std::ostringstream msg;
      msg << source_name << ":" << line_no << ": empty coarse category name";
      throw Error(ErrorCode::Parse, msg.str());
    }
    if (std::find(categories.begin(), categories.end(), coarse) == categories.end()) {
      categories.push_back(coarse);
    }
    bind(coarse, coarse, line_no);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      if (!fields[i].empty()) bind(fields[i], coarse, line_no);
    }
  }
  return CategorySet::create(std::move(categories), std::move(mapping),
                             VocabSource::CocoSynonyms);
}

CategorySet load_synonym_lexicon(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_synonym_lexicon(in, path.string());
}

// ---------------------------------------------------------------------------
// Hierarchy

std::map<std::string, std::string> load_class_descriptions(
    const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(line_no) +
                                        ": expected 'LabelName,DisplayName'");
    }
    std::string label = line.substr(0, comma);
    std::string name = line.substr(comma + 1);
    if (name.size() >= 2 && name.front() == '"' && name.back() == '"') {
      name = name.substr(1, name.size() - 2);
    }
    out[label] = name;
  }
  return out;
}

namespace {

HierarchyNode parse_node(const nlohmann::json& node,
                         const std::map<std::string, std::string>* label_names,
                         std::size_t depth) {
  if (depth > 10000) {
    throw Error(ErrorCode::Structure, "hierarchy nesting too deep");
  }
  if (!node.is_object()) {
    throw Error(ErrorCode::Format, "hierarchy node must be a JSON object");
  }
  HierarchyNode out;
  const nlohmann::json* kids = nullptr;
  if (auto it = node.find("LabelName"); it != node.end()) {
    if (!it->is_string()) throw Error(ErrorCode::Format, "LabelName must be a string");
    std::string label = it->get<std::string>();
    std::string display = label;
    for (const char* key : {"DisplayName", "display_name", "name"}) {
      if (auto d = node.find(key); d != node.end() && d->is_string()) {
        display = d->get<std::string>();
        break;
      }
    }
    if (display == label && label_names != nullptr) {
      if (auto found = label_names->find(label); found != label_names->end()) {
        display = found->second;
      }
    }
    out.name = display;
    if (auto sub = node.find("Subcategory"); sub != node.end()) kids = &*sub;
  } else if (auto it = node.find("name"); it != node.end()) {
    if (!it->is_string()) throw Error(ErrorCode::Format, "name must be a string");
    out.name = it->get<std::string>();
    if (auto sub = node.find("children"); sub != node.end()) kids = &*sub;
  } else {
    throw Error(ErrorCode::Format,
                "hierarchy node has neither 'LabelName' nor 'name'");
  }
  if (kids != nullptr) {
    if (!kids->is_array()) {
      throw Error(ErrorCode::Format, "children of '" + out.name + "' must be an array");
    }
    out.children.reserve(kids->size());
    for (const auto& child : *kids) {
      out.children.push_back(parse_node(child, label_names, depth + 1));
    }
  }
  return out;
}

struct Occurrence {
  std::string parent;               // empty for children of the root
  std::vector<std::string> chain;   // ancestors, nearest first, root excluded
  bool has_children = false;
};

}  // namespace

HierarchyNode parse_hierarchy_json(const nlohmann::json& doc,
                                   const std::map<std::string, std::string>* label_names) {
  return parse_node(doc, label_names, 0);
}

HierarchyNode load_hierarchy(const std::filesystem::path& path,
                             const std::optional<std::filesystem::path>& class_descriptions) {
  auto doc = detail::read_json_file(path);
  if (class_descriptions) {
    auto names = load_class_descriptions(*class_descriptions);
    return parse_hierarchy_json(doc, &names);
  }
  return parse_hierarchy_json(doc, nullptr);
}

VocabBuild build_coarse_categories(const HierarchyNode& hierarchy) {
  const std::string root_name = normalize_name(hierarchy.name);

  std::vector<std::string> order;  // first-occurrence document order
  std::unordered_map<std::string, std::vector<Occurrence>> occurrences;
  std::vector<std::string> path;
  std::unordered_set<std::string> on_path;

  std::function<void(const HierarchyNode&)> walk = [&](const HierarchyNode& node) {
    for (const auto& child : node.children) {
      std::string name = normalize_name(child.name);
      if (name.empty()) {
        throw Error(ErrorCode::Structure, "hierarchy contains an unnamed class");
      }
      if (name == root_name || on_path.contains(name)) {
        throw Error(ErrorCode::Structure, "cycle: '" + name +
                                              "' is its own ancestor");
      }
      Occurrence occ;
      occ.parent = path.empty() ? std::string() : path.back();
      occ.chain.assign(path.rbegin(), path.rend());
      occ.has_children = !child.children.empty();
      auto& list = occurrences[name];
      if (list.empty()) order.push_back(name);
      list.push_back(std::move(occ));

      path.push_back(name);
      on_path.insert(name);
      walk(child);
      on_path.erase(name);
      path.pop_back();
    }
  };
  walk(hierarchy);

  std::unordered_set<std::string> kept;
  std::vector<std::string> categories;
  for (const auto& name : order) {
    const auto& occs = occurrences.at(name);
    bool super = std::any_of(occs.begin(), occs.end(),
                             [](const Occurrence& o) { return o.has_children; });
    bool isolated = std::all_of(occs.begin(), occs.end(), [](const Occurrence& o) {
      return o.parent.empty() && !o.has_children;
    });
    if (super || isolated) {
      kept.insert(name);
      categories.push_back(name);
    }
  }

  VocabBuild out;
  std::map<std::string, std::string> mapping;
  auto nearest_kept = [&](const Occurrence& occ) -> std::optional<std::string> {
    for (const auto& ancestor : occ.chain) {
      if (kept.contains(ancestor)) return ancestor;
    }
    return std::nullopt;
  };
  for (const auto& name : order) {
    if (kept.contains(name)) {
      mapping[name] = name;
      continue;
    }
    const auto& occs = occurrences.at(name);
    auto target = nearest_kept(occs.front());
    if (!target) {
      throw Error(ErrorCode::Mapping, "orphan class '" + name +
                                          "' has no kept ancestor");
    }
    mapping[name] = *target;
    for (std::size_t i = 1; i < occs.size(); ++i) {
      auto other = nearest_kept(occs[i]);
      std::string where = other ? *other : std::string("<root>");
      if (where != *target) {
        out.warnings.push_back("class '" + name + "' appears under multiple parents; mapped to '" +
                               *target + "', also under '" + where + "'");
      }
    }
  }
  out.vocab = CategorySet::create(std::move(categories), std::move(mapping),
                                  VocabSource::OpenImagesHierarchy);
  return out;
}

// ---------------------------------------------------------------------------
// Merge

VocabBuild merge(const CategorySet& a, const CategorySet& b) {
  VocabBuild out;
  std::vector<std::string> categories = a.categories();
  std::map<std::string, std::string> mapping = a.fine_to_coarse();

  // A category of b that a maps elsewhere is folded into a's target.
  std::map<std::string, std::string> redirect;
  for (const auto& name : b.categories()) {
    auto mine = a.coarse_of(name);
    if (mine && *mine != name) {
      redirect[name] = *mine;
      out.warnings.push_back("category '" + name + "' of the second vocabulary is mapped to '" +
                             *mine + "' by the first; folded");
    } else if (!mine) {
      categories.push_back(name);
    }
  }
  for (const auto& [fine, coarse] : b.fine_to_coarse()) {
    std::string target = coarse;
    if (auto r = redirect.find(coarse); r != redirect.end()) target = r->second;
    auto [it, inserted] = mapping.emplace(fine, target);
    if (!inserted && it->second != target && fine != coarse) {
      out.warnings.push_back("'" + fine + "' maps to '" + it->second +
                             "' (kept) and '" + target + "' (dropped)");
    }
  }
  out.vocab = CategorySet::create(std::move(categories), std::move(mapping),
                                  VocabSource::Merged);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const CategorySet& vocab) {
  nlohmann::json mapping = nlohmann::json::object();
  for (const auto& [fine, coarse] : vocab.fine_to_coarse()) mapping[fine] = coarse;
  return {
      {"source", std::string(to_string(vocab.source()))},
      {"categories", vocab.categories()},
      {"fine_to_coarse", std::move(mapping)},
  };
}

CategorySet category_set_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("categories") || !doc["categories"].is_array()) {
    throw Error(ErrorCode::Format, "vocabulary JSON needs a 'categories' array");
  }
  VocabSource source = VocabSource::Merged;
  if (auto it = doc.find("source"); it != doc.end() && it->is_string()) {
    const auto s = it->get<std::string>();
    if (s == "coco_synonyms") source = VocabSource::CocoSynonyms;
    else if (s == "open_images_hierarchy") source = VocabSource::OpenImagesHierarchy;
  }
  std::vector<std::string> categories;
  for (const auto& c : doc["categories"]) {
    if (!c.is_string()) throw Error(ErrorCode::Format, "category names must be strings");
    categories.push_back(normalize_name(c.get<std::string>()));
  }
  std::map<std::string, std::string> mapping;
  if (auto it = doc.find("fine_to_coarse"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorCode::Format, "'fine_to_coarse' must be an object");
    for (const auto& [fine, coarse] : it->items()) {
      if (!coarse.is_string()) throw Error(ErrorCode::Format, "mapping values must be strings");
      mapping[normalize_name(fine)] = normalize_name(coarse.get<std::string>());
    }
  }
  return CategorySet::create(std::move(categories), std::move(mapping), source);
}

CategorySet load_vocab_json(const std::filesystem::path& path) {
  return category_set_from_json(detail::read_json_file(path));
}

}  // namespace chair
