#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "conind/error.hpp"
#include "conind/label.hpp"

namespace conind {

/// Index of a concept inside one ConceptHierarchy.
struct ConceptId {
  std::uint32_t value = 0;
  friend auto operator<=>(const ConceptId&, const ConceptId&) = default;
};

/// Subclass DAG over normalized concept labels (the terminological part of the knowledge base).
///
/// Built through ConceptHierarchy::Builder; immutable afterwards. The reflexive-transitive
/// ancestor closure of every concept is materialized at build time, so `subsumes` is a binary
/// search and the object can be shared freely between threads.
class ConceptHierarchy {
 public:
  class Builder {
   public:
    /// Declares a concept (idempotent). Throws if the label normalizes to empty.
    ConceptId add_concept(std::string_view raw_label) {
      std::string label = normalize_label(raw_label);
      if (label.empty()) throw Error("empty concept label");
      auto [it, inserted] = index_.try_emplace(label, ConceptId{static_cast<std::uint32_t>(labels_.size())});
      if (inserted) {
        labels_.push_back(std::move(label));
        parents_.emplace_back();
      }
      return it->second;
    }

    /// Declares `child` ⊑ `parent`, creating either concept if needed.
    void add_edge(std::string_view child, std::string_view parent) {
      const ConceptId c = add_concept(child);
      const ConceptId p = add_concept(parent);
      auto& ps = parents_[c.value];
      if (std::find(ps.begin(), ps.end(), p) == ps.end()) ps.push_back(p);
    }

    /// Validates acyclicity and computes closures. Throws CycleError naming a cycle.
    ConceptHierarchy build() && {
      ConceptHierarchy h;
      h.labels_ = std::move(labels_);
      h.index_ = std::move(index_);
      h.parents_ = std::move(parents_);
      for (auto& ps : h.parents_) std::sort(ps.begin(), ps.end());
      h.compute_closures();
      return h;
    }

   private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, ConceptId> index_;
    std::vector<std::vector<ConceptId>> parents_;
  };

  std::size_t size() const noexcept { return labels_.size(); }

  const std::string& label(ConceptId id) const {
    check(id);
    return labels_[id.value];
  }

  /// Exact lookup of an already-normalized label.
  std::optional<ConceptId> find(std::string_view normalized) const {
    auto it = index_.find(std::string(normalized));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  ConceptId id_of(std::string_view normalized) const {
    if (auto id = find(normalized)) return *id;
    throw UnknownConcept(std::string(normalized));
  }

  std::span<const ConceptId> parents(ConceptId id) const {
    check(id);
    return parents_[id.value];
  }

  /// Sorted reflexive-transitive ancestors of `id` (includes `id`).
  std::span<const ConceptId> ancestors(ConceptId id) const {
    check(id);
    return closure_[id.value];
  }

  bool subsumes(ConceptId ancestor, ConceptId descendant) const {
    check(ancestor);
    check(descendant);
    const auto& up = closure_[descendant.value];
    return std::binary_search(up.begin(), up.end(), ancestor);
  }

  /// `id` and its ancestors reachable in at most `max_edges` upward steps, sorted.
  std::vector<ConceptId> ancestors_within(ConceptId id, std::size_t max_edges) const {
    check(id);
    std::vector<ConceptId> seen{id};
    std::vector<ConceptId> frontier{id};
    for (std::size_t step = 0; step < max_edges && !frontier.empty(); ++step) {
      std::vector<ConceptId> next;
      for (ConceptId c : frontier) {
        for (ConceptId p : parents_[c.value]) {
          if (std::find(seen.begin(), seen.end(), p) == seen.end()) {
            seen.push_back(p);
            next.push_back(p);
          }
        }
      }
      frontier = std::move(next);
    }
    std::sort(seen.begin(), seen.end());
    return seen;
  }

  std::size_t edge_count() const noexcept {
    std::size_t n = 0;
    for (const auto& ps : parents_) n += ps.size();
    return n;
  }

 private:
  void check(ConceptId id) const {
    if (id.value >= labels_.size()) throw UnknownConcept("#" + std::to_string(id.value));
  }

  // Iterative DFS in post-order; a grey node reached again closes a cycle.
  void compute_closures() {
    const std::size_t n = labels_.size();
    enum class Mark : std::uint8_t { white, grey, black };
    std::vector<Mark> mark(n, Mark::white);
    closure_.assign(n, {});
    std::vector<std::pair<std::uint32_t, std::size_t>> stack;
    for (std::uint32_t root = 0; root < n; ++root) {
      if (mark[root] != Mark::white) continue;
      stack.emplace_back(root, 0);
      mark[root] = Mark::grey;
      while (!stack.empty()) {
        auto& [node, next_parent] = stack.back();
        const auto& ps = parents_[node];
        if (next_parent < ps.size()) {
          const std::uint32_t p = ps[next_parent++].value;
          if (mark[p] == Mark::grey) throw CycleError(describe_cycle(stack, p));
          if (mark[p] == Mark::white) {
            mark[p] = Mark::grey;
            stack.emplace_back(p, 0);
          }
          continue;
        }
        std::vector<ConceptId> up{ConceptId{node}};
        for (ConceptId p : ps) up.insert(up.end(), closure_[p.value].begin(), closure_[p.value].end());
        std::sort(up.begin(), up.end());
        up.erase(std::unique(up.begin(), up.end()), up.end());
        closure_[node] = std::move(up);
        mark[node] = Mark::black;
        stack.pop_back();
      }
    }
  }

  std::string describe_cycle(const std::vector<std::pair<std::uint32_t, std::size_t>>& stack,
                             std::uint32_t reentry) const {
    std::string path;
    bool on = false;
    for (const auto& frame : stack) {
      if (frame.first == reentry) on = true;
      if (on) path += labels_[frame.first] + " -> ";
    }
    return "subclass cycle: " + path + labels_[reentry];
  }

  std::vector<std::string> labels_;
  std::unordered_map<std::string, ConceptId> index_;
  std::vector<std::vector<ConceptId>> parents_;
  std::vector<std::vector<ConceptId>> closure_;
};

/// Label-level entailment check; throws UnknownConcept for undeclared labels.
inline bool subsumes(std::string_view ancestor, std::string_view descendant, const ConceptHierarchy& h) {
  return h.subsumes(h.id_of(normalize_label(ancestor)), h.id_of(normalize_label(descendant)));
}

/// Reads `child<TAB>parent` lines. A line with a single field declares an isolated concept.
inline ConceptHierarchy parse_hierarchy(std::istream& in, const std::string& source = "<hierarchy>") {
  ConceptHierarchy::Builder builder;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    try {
      if (tab == std::string::npos) {
        builder.add_concept(line);
        continue;
      }
      if (line.find('\t', tab + 1) != std::string::npos) throw Error("expected 'child<TAB>parent'");
      const std::string_view child(line.data(), tab);
      const std::string_view parent(line.data() + tab + 1, line.size() - tab - 1);
      builder.add_edge(child, parent);
    } catch (const InputError&) {
      throw;
    } catch (const Error& e) {
      throw InputError(source, line_no, e.what());
    }
  }
  try {
    return std::move(builder).build();
  } catch (const CycleError& e) {
    throw InputError(source, 0, e.what());
  }
}

inline ConceptHierarchy load_hierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open hierarchy file");
  return parse_hierarchy(in, path);
}

}  // namespace conind
