#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "conind/error.hpp"
#include "conind/hierarchy.hpp"
#include "conind/label.hpp"

namespace conind {

/// Class expression over the single role `contains`.
///
/// An atom C stands for the existential restriction ∃contains.C ("the image contains something
/// that is a C"). Conjunctions and disjunctions are built through `all_of` / `any_of`, which
/// canonicalize: same-kind children are flattened, duplicates removed, and the remaining
/// children sorted by their canonical key. A compound collapsing to one child is that child.
class ClassExpression;
bool canonical_less(const ClassExpression& a, const ClassExpression& b);

class ClassExpression {
 public:
  enum class Kind { atom, conjunction, disjunction };

  static ClassExpression atom(std::string_view concept_label) {
    ClassExpression e;
    e.kind_ = Kind::atom;
    e.concept_ = normalize_label(concept_label);
    if (e.concept_.empty()) throw Error("atom with empty concept label");
    e.key_ = e.concept_;
    return e;
  }

  static ClassExpression all_of(std::vector<ClassExpression> children) {
    return compound(Kind::conjunction, std::move(children));
  }

  static ClassExpression any_of(std::vector<ClassExpression> children) {
    return compound(Kind::disjunction, std::move(children));
  }

  Kind kind() const noexcept { return kind_; }
  bool is_atom() const noexcept { return kind_ == Kind::atom; }

  /// Concept label of an atom; empty for compounds.
  const std::string& concept_label() const noexcept { return concept_; }

  std::span<const ClassExpression> children() const noexcept { return children_; }

  /// Canonical machine key, e.g. `and(mountain,snow)`. Used for ordering and equality.
  const std::string& key() const noexcept { return key_; }

  /// Number of atoms.
  std::size_t size() const noexcept {
    if (is_atom()) return 1;
    std::size_t n = 0;
    for (const auto& c : children_) n += c.size();
    return n;
  }

  /// Atoms have depth 1.
  std::size_t depth() const noexcept {
    std::size_t d = 0;
    for (const auto& c : children_) d = std::max(d, c.depth());
    return d + 1;
  }

  friend bool operator==(const ClassExpression& a, const ClassExpression& b) {
    return a.kind_ == b.kind_ && a.key_ == b.key_;
  }

  friend bool canonical_less(const ClassExpression& a, const ClassExpression& b);

 private:
  static ClassExpression compound(Kind kind, std::vector<ClassExpression> children) {
    std::vector<ClassExpression> flat;
    for (auto& c : children) {
      if (c.kind_ == kind) {
        for (auto& g : c.children_) flat.push_back(std::move(g));
      } else {
        flat.push_back(std::move(c));
      }
    }
    std::sort(flat.begin(), flat.end(), canonical_less);
    flat.erase(std::unique(flat.begin(), flat.end()), flat.end());
    if (flat.empty()) throw Error("compound expression with no children");
    if (flat.size() == 1) return std::move(flat.front());

    ClassExpression e;
    e.kind_ = kind;
    e.key_ = kind == Kind::conjunction ? "and(" : "or(";
    for (std::size_t i = 0; i < flat.size(); ++i) {
      if (i) e.key_ += ',';
      e.key_ += flat[i].key_;
    }
    e.key_ += ')';
    e.children_ = std::move(flat);
    return e;
  }

  Kind kind_ = Kind::atom;
  std::string concept_;
  std::vector<ClassExpression> children_;
  std::string key_;
};

inline bool canonical_less(const ClassExpression& a, const ClassExpression& b) {
  if (a.key_ != b.key_) return a.key_ < b.key_;
  return a.kind_ < b.kind_;
}


/// Display form: atoms print their label, compounds join children with ", ".
/// Conjunction and disjunction render identically; use `to_json` to tell them apart.
inline std::string serialize_expression(const ClassExpression& e) {
  if (e.is_atom()) return e.concept_label();
  std::string out;
  for (const auto& c : e.children()) {
    if (!out.empty()) out += ", ";
    out += serialize_expression(c);
  }
  return out;
}

/// Machine form: {"atom": "c"} | {"and": [...]} | {"or": [...]}.
inline nlohmann::json to_json(const ClassExpression& e) {
  using Kind = ClassExpression::Kind;
  if (e.is_atom()) return {{"atom", e.concept_label()}};
  nlohmann::json children = nlohmann::json::array();
  for (const auto& c : e.children()) children.push_back(to_json(c));
  return {{e.kind() == Kind::conjunction ? "and" : "or", std::move(children)}};
}

inline ClassExpression expression_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.size() != 1) throw Error("expression must be a single-key object");
  const auto& [op, body] = *j.items().begin();
  if (op == "atom") {
    if (!body.is_string()) throw Error("atom body must be a string");
    return ClassExpression::atom(body.get<std::string>());
  }
  if (op != "and" && op != "or") throw Error("unknown expression operator '" + op + "'");
  if (!body.is_array() || body.size() < 2) throw Error("'" + op + "' needs at least two children");
  std::vector<ClassExpression> children;
  for (const auto& c : body) children.push_back(expression_from_json(c));
  return op == "and" ? ClassExpression::all_of(std::move(children))
                     : ClassExpression::any_of(std::move(children));
}

/// Throws UnknownConcept for an undeclared atom and Error when deeper than `max_depth`.
inline void validate_expression(const ClassExpression& e, const ConceptHierarchy& h,
                                std::size_t max_depth = 2) {
  if (e.depth() > max_depth)
    throw Error("expression '" + e.key() + "' exceeds max depth " + std::to_string(max_depth));
  if (e.is_atom()) {
    h.id_of(e.concept_label());
    return;
  }
  for (const auto& c : e.children()) validate_expression(c, h, max_depth);
}

}  // namespace conind
