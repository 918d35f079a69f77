#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "conind/error.hpp"
#include "conind/expression.hpp"
#include "conind/hierarchy.hpp"
#include "conind/label.hpp"

namespace conind {

/// One image individual and the concepts its annotations matched.
struct ImageFacts {
  std::string image_id;
  std::vector<ConceptId> matched_concepts;  // sorted, unique
  std::vector<std::string> unmatched_labels;
};

/// Exact lexical match of each normalized label against the hierarchy. No fuzzy matching.
inline ImageFacts match_annotations(std::string image_id, std::span<const std::string> labels,
                                    const ConceptHierarchy& h) {
  ImageFacts facts{std::move(image_id), {}, {}};
  for (const auto& raw : labels) {
    const std::string norm = normalize_label(raw);
    const auto id = norm.empty() ? std::nullopt : h.find(norm);
    if (id) {
      facts.matched_concepts.push_back(*id);
    } else {
      facts.unmatched_labels.push_back(raw);
    }
  }
  std::sort(facts.matched_concepts.begin(), facts.matched_concepts.end());
  facts.matched_concepts.erase(std::unique(facts.matched_concepts.begin(), facts.matched_concepts.end()),
                               facts.matched_concepts.end());
  return facts;
}

/// Closed-world instance check: does `image` satisfy `expr`?
///
/// An atom C holds when some matched concept D has C as an ancestor-or-self.
inline bool is_instance(const ImageFacts& image, const ClassExpression& expr, const ConceptHierarchy& h) {
  using Kind = ClassExpression::Kind;
  switch (expr.kind()) {
    case Kind::atom: {
      const ConceptId c = h.id_of(expr.concept_label());
      return std::any_of(image.matched_concepts.begin(), image.matched_concepts.end(),
                         [&](ConceptId d) { return h.subsumes(c, d); });
    }
    case Kind::conjunction:
      for (const auto& child : expr.children())
        if (!is_instance(image, child, h)) return false;
      return true;
    case Kind::disjunction:
      for (const auto& child : expr.children())
        if (is_instance(image, child, h)) return true;
      return false;
  }
  return false;
}

/// Hierarchy plus per-image facts. Immutable after construction.
class KnowledgeBase {
 public:
  KnowledgeBase(ConceptHierarchy hierarchy, std::vector<ImageFacts> images)
      : hierarchy_(std::move(hierarchy)), images_(std::move(images)) {
    index_.reserve(images_.size());
    closures_.reserve(images_.size());
    for (std::size_t i = 0; i < images_.size(); ++i) {
      auto& img = images_[i];
      if (!index_.emplace(img.image_id, i).second) throw Error("duplicate image id '" + img.image_id + "'");
      std::vector<ConceptId> up;
      for (ConceptId c : img.matched_concepts) {
        const auto anc = hierarchy_.ancestors(c);
        up.insert(up.end(), anc.begin(), anc.end());
      }
      std::sort(up.begin(), up.end());
      up.erase(std::unique(up.begin(), up.end()), up.end());
      closures_.push_back(std::move(up));
    }
  }

  const ConceptHierarchy& hierarchy() const noexcept { return hierarchy_; }
  std::span<const ImageFacts> images() const noexcept { return images_; }

  bool contains(const std::string& image_id) const { return index_.count(image_id) != 0; }

  const ImageFacts& image(const std::string& image_id) const { return images_[index_of(image_id)]; }

  /// Every concept entailed for the image via `contains` (matched concepts and all ancestors), sorted.
  std::span<const ConceptId> entailed_concepts(const std::string& image_id) const {
    return closures_[index_of(image_id)];
  }

  bool is_instance(const std::string& image_id, const ClassExpression& expr) const {
    return conind::is_instance(image(image_id), expr, hierarchy_);
  }

 private:
  std::size_t index_of(const std::string& image_id) const {
    auto it = index_.find(image_id);
    if (it == index_.end()) throw UnknownImage(image_id);
    return it->second;
  }

  ConceptHierarchy hierarchy_;
  std::vector<ImageFacts> images_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<ConceptId>> closures_;
};

/// Reads JSON Lines `{"image_id": "...", "objects": [...]}` and matches each line's objects.
inline std::vector<ImageFacts> parse_annotations(std::istream& in, const ConceptHierarchy& h,
                                                 const std::string& source = "<annotations>") {
  std::vector<ImageFacts> out;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("image_id") || !j["image_id"].is_string() || !j.contains("objects") ||
        !j["objects"].is_array())
      throw InputError(source, line_no, "expected {\"image_id\": string, \"objects\": [string, ...]}");
    std::vector<std::string> labels;
    for (const auto& o : j["objects"]) {
      if (!o.is_string()) throw InputError(source, line_no, "object labels must be strings");
      labels.push_back(o.get<std::string>());
    }
    auto id = j["image_id"].get<std::string>();
    if (!seen.emplace(id, line_no).second) throw InputError(source, line_no, "duplicate image_id '" + id + "'");
    out.push_back(match_annotations(std::move(id), labels, h));
  }
  return out;
}

inline std::vector<ImageFacts> load_annotations(const std::string& path, const ConceptHierarchy& h) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open annotations file");
  return parse_annotations(in, h, path);
}

}  // namespace conind
