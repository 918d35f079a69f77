#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "conind/hierarchy.hpp"
#include "conind/knowledge_base.hpp"

namespace conind::oracle {

/// Random DAG over concepts c0..c{n-1}: edges only go from a higher index to a lower one.
inline std::vector<std::pair<std::size_t, std::size_t>> random_dag_edges(std::mt19937_64& rng, std::size_t n,
                                                                         double density) {
  std::bernoulli_distribution coin(density);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t child = 1; child < n; ++child)
    for (std::size_t parent = 0; parent < child; ++parent)
      if (coin(rng)) edges.emplace_back(child, parent);
  return edges;
}

inline std::string concept_name(std::size_t i) { return "c" + std::to_string(i); }

inline ConceptHierarchy build_hierarchy(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  ConceptHierarchy::Builder b;
  for (std::size_t i = 0; i < n; ++i) b.add_concept(concept_name(i));
  for (auto [c, p] : edges) b.add_edge(concept_name(c), concept_name(p));
  return std::move(b).build();
}

/// Plain DFS reachability over the edge list (child -> parent), reflexive.
inline bool reachable(std::size_t from, std::size_t to, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (from == to) return true;
  std::vector<std::size_t> stack{from};
  std::vector<bool> seen;
  while (!stack.empty()) {
    const auto node = stack.back();
    stack.pop_back();
    if (node >= seen.size()) seen.resize(node + 1, false);
    if (seen[node]) continue;
    seen[node] = true;
    for (auto [c, p] : edges) {
      if (c != node) continue;
      if (p == to) return true;
      stack.push_back(p);
    }
  }
  return false;
}

struct RandomKb {
  std::size_t concepts = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<std::size_t>> image_concepts;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};

inline std::string image_name(std::size_t i) { return "img" + std::to_string(i); }

/// Small random knowledge base with a random disjoint P/N split (P non-empty).
inline RandomKb random_kb(std::mt19937_64& rng, std::size_t max_concepts = 12, std::size_t max_images = 16) {
  RandomKb r;
  r.concepts = std::uniform_int_distribution<std::size_t>(2, max_concepts)(rng);
  r.edges = random_dag_edges(rng, r.concepts, 0.2);
  const auto images = std::uniform_int_distribution<std::size_t>(2, max_images)(rng);
  std::uniform_int_distribution<std::size_t> pick(0, r.concepts - 1);
  std::uniform_int_distribution<std::size_t> count(0, 3);
  std::uniform_int_distribution<int> role(0, 2);
  for (std::size_t i = 0; i < images; ++i) {
    std::vector<std::size_t> cs;
    for (std::size_t k = count(rng); k > 0; --k) cs.push_back(pick(rng));
    r.image_concepts.push_back(cs);
    const int which = role(rng);
    if (which == 0 || (i == 0)) r.positives.push_back(image_name(i));
    else if (which == 1) r.negatives.push_back(image_name(i));
  }
  return r;
}

inline KnowledgeBase materialize(const RandomKb& r) {
  auto h = build_hierarchy(r.concepts, r.edges);
  std::vector<ImageFacts> facts;
  for (std::size_t i = 0; i < r.image_concepts.size(); ++i) {
    std::vector<std::string> labels;
    for (auto c : r.image_concepts[i]) labels.push_back(concept_name(c));
    facts.push_back(match_annotations(image_name(i), labels, h));
  }
  return KnowledgeBase(std::move(h), std::move(facts));
}

/// Concepts matched in positive images plus ancestors up to `depth` edges, by BFS over the raw edge list.
inline std::vector<std::size_t> oracle_atoms(const RandomKb& r, std::size_t depth) {
  std::vector<bool> in(r.concepts, false);
  for (const auto& id : r.positives) {
    const auto img = static_cast<std::size_t>(std::stoul(id.substr(3)));
    std::vector<std::size_t> frontier(r.image_concepts[img].begin(), r.image_concepts[img].end());
    for (auto c : frontier) in[c] = true;
    for (std::size_t step = 0; step < depth; ++step) {
      std::vector<std::size_t> next;
      for (auto c : frontier)
        for (auto [child, parent] : r.edges)
          if (child == c) {
            in[parent] = true;
            next.push_back(parent);
          }
      frontier = std::move(next);
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < r.concepts; ++c)
    if (in[c]) out.push_back(c);
  return out;
}

struct OracleBest {
  std::uint64_t hits = 0;   // |Z1| + |Z2|
  std::uint64_t total = 0;  // |P u N|
};

/// Exhaustive maximum coverage over atoms and all And/Or combinations of 2..max_size atoms,
/// each expression evaluated image by image with is_instance.
inline OracleBest exhaustive_best(const RandomKb& r, const KnowledgeBase& kb, std::size_t depth, std::size_t max_size,
                                  bool allow_or) {
  const auto atoms = oracle_atoms(r, depth);
  OracleBest best{0, r.positives.size() + r.negatives.size()};
  auto consider = [&](const ClassExpression& e) {
    std::uint64_t hits = 0;
    for (const auto& p : r.positives) hits += kb.is_instance(p, e) ? 1 : 0;
    for (const auto& n : r.negatives) hits += kb.is_instance(n, e) ? 0 : 1;
    best.hits = std::max(best.hits, hits);
  };
  const std::size_t m = atoms.size();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
    const auto k = static_cast<std::size_t>(std::popcount(mask));
    if (k > max_size) continue;
    std::vector<ClassExpression> members;
    for (std::size_t i = 0; i < m; ++i)
      if (mask & (std::uint64_t{1} << i)) members.push_back(ClassExpression::atom(concept_name(atoms[i])));
    if (k == 1) {
      consider(members.front());
      continue;
    }
    consider(ClassExpression::all_of(members));
    if (allow_or) consider(ClassExpression::any_of(members));
  }
  return best;
}

}  // namespace conind::oracle
