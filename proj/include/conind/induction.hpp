#pragma once

#include <algorithm>
#include <iterator>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "conind/error.hpp"
#include "conind/expression.hpp"
#include "conind/knowledge_base.hpp"
#include "conind/ratio.hpp"

namespace conind {

/// A class expression with its coverage against one neuron's positive/negative sets.
///
/// coverage = (z1 + z2) / |P ∪ N| where z1 counts positives that are instances of the
/// expression and z2 counts negatives that are not.
struct ScoredExpression {
  ClassExpression expr;
  Ratio coverage;
  std::size_t z1 = 0;
  std::size_t z2 = 0;
};

struct InductionConfig {
  std::size_t beam_width = 16;
  std::size_t max_combination_size = 2;
  std::size_t top_n = 3;
  bool allow_disjunction = true;
  std::size_t ancestor_depth = 2;
  /// Keep every atom through stage 1 (test mode for oracle checks).
  bool exhaustive = false;

  void validate() const {
    if (beam_width < 1) throw Error("beam_width must be >= 1");
    if (max_combination_size < 1) throw Error("max_combination_size must be >= 1");
    if (top_n < 1) throw Error("top_n must be >= 1");
  }
};

struct InductionResult {
  std::vector<ScoredExpression> ranked;
  /// Set when the positive images yielded no candidate atoms.
  bool no_candidates = false;
  std::size_t atoms = 0;
  std::size_t expressions_scored = 0;
};

/// Total order used for ranking: coverage desc, size asc, display string asc, key asc.
inline bool ranks_before(const ScoredExpression& a, const ScoredExpression& b) {
  if (a.coverage != b.coverage) return a.coverage > b.coverage;
  const auto sa = a.expr.size();
  const auto sb = b.expr.size();
  if (sa != sb) return sa < sb;
  const auto da = serialize_expression(a.expr);
  const auto db = serialize_expression(b.expr);
  if (da != db) return da < db;
  return canonical_less(a.expr, b.expr);
}

namespace detail {

inline std::vector<std::string> sorted_unique(std::span<const std::string> ids) {
  std::vector<std::string> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

inline void check_sets(const std::vector<std::string>& p, const std::vector<std::string>& n,
                       const KnowledgeBase& kb) {
  if (p.empty() && n.empty()) throw Error("coverage undefined: positive and negative sets are both empty");
  std::vector<std::string> both;
  std::set_intersection(p.begin(), p.end(), n.begin(), n.end(), std::back_inserter(both));
  if (!both.empty()) throw Error("image '" + both.front() + "' is in both positive and negative sets");
  for (const auto& id : p)
    if (!kb.contains(id)) throw UnknownImage(id);
  for (const auto& id : n)
    if (!kb.contains(id)) throw UnknownImage(id);
}

/// Membership bitmap over a fixed image list.
class Bits {
 public:
  explicit Bits(std::size_t n = 0) : words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i / 64] |= std::uint64_t{1} << (i % 64); }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }

  Bits& operator&=(const Bits& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
    return *this;
  }

  Bits& operator|=(const Bits& o) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= o.words_[i];
    return *this;
  }

 private:
  std::vector<std::uint64_t> words_;
};

struct AtomExtension {
  ClassExpression expr;
  Bits positives;
  Bits negatives;
};

/// Keeps the best `capacity` entries under ranks_before.
class TopList {
 public:
  explicit TopList(std::size_t capacity) : capacity_(capacity) {}

  void offer(ScoredExpression s) {
    if (items_.size() == capacity_ && !ranks_before(s, items_.back())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), s, ranks_before);
    items_.insert(pos, std::move(s));
    if (items_.size() > capacity_) items_.pop_back();
  }

  std::vector<ScoredExpression> take() && { return std::move(items_); }

 private:
  std::size_t capacity_;
  std::vector<ScoredExpression> items_;
};

}  // namespace detail

/// Scores one expression by direct instance checks against the knowledge base.
inline ScoredExpression coverage(const ClassExpression& expr, std::span<const std::string> positives,
                                 std::span<const std::string> negatives, const KnowledgeBase& kb) {
  const auto p = detail::sorted_unique(positives);
  const auto n = detail::sorted_unique(negatives);
  detail::check_sets(p, n, kb);
  ScoredExpression s{expr, {}, 0, 0};
  for (const auto& id : p) s.z1 += kb.is_instance(id, expr) ? 1 : 0;
  for (const auto& id : n) s.z2 += kb.is_instance(id, expr) ? 0 : 1;
  s.coverage = Ratio(s.z1 + s.z2, p.size() + n.size());
  return s;
}

/// Atoms for every concept matched in a positive image, plus ancestors up to `ancestor_depth`
/// edges above. Sorted canonically.
inline std::vector<ClassExpression> candidate_atoms(std::span<const std::string> positives, const KnowledgeBase& kb,
                                                    std::size_t ancestor_depth = 2) {
  const auto& h = kb.hierarchy();
  std::vector<ConceptId> ids;
  for (const auto& image_id : positives) {
    for (ConceptId c : kb.image(image_id).matched_concepts) {
      const auto up = h.ancestors_within(c, ancestor_depth);
      ids.insert(ids.end(), up.begin(), up.end());
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<ClassExpression> atoms;
  atoms.reserve(ids.size());
  for (ConceptId c : ids) atoms.push_back(ClassExpression::atom(h.label(c)));
  std::sort(atoms.begin(), atoms.end(), canonical_less);
  return atoms;
}

/// Two-stage beam induction.
///
/// Stage 1 scores every candidate atom and keeps the best `beam_width` (all of them in
/// exhaustive mode). Stage 2 scores every conjunction, and disjunction when allowed, of
/// 2..max_combination_size surviving atoms. Returns the overall best `top_n` under ranks_before.
inline InductionResult induce(std::span<const std::string> positives, std::span<const std::string> negatives,
                              const KnowledgeBase& kb, const InductionConfig& cfg = {}) {
  cfg.validate();
  const auto p = detail::sorted_unique(positives);
  const auto n = detail::sorted_unique(negatives);
  detail::check_sets(p, n, kb);
  const auto& h = kb.hierarchy();
  const std::uint64_t total = p.size() + n.size();

  InductionResult result;
  const auto atoms = candidate_atoms(p, kb, cfg.ancestor_depth);
  result.atoms = atoms.size();
  if (atoms.empty()) {
    result.no_candidates = true;
    return result;
  }

  std::vector<detail::AtomExtension> ext;
  ext.reserve(atoms.size());
  for (const auto& a : atoms) ext.push_back({a, detail::Bits(p.size()), detail::Bits(n.size())});
  std::vector<ConceptId> atom_ids;
  for (const auto& a : atoms) atom_ids.push_back(h.id_of(a.concept_label()));

  auto mark = [&](const std::vector<std::string>& ids, bool positive) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto entailed = kb.entailed_concepts(ids[i]);
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        if (std::binary_search(entailed.begin(), entailed.end(), atom_ids[a]))
          (positive ? ext[a].positives : ext[a].negatives).set(i);
      }
    }
  };
  mark(p, true);
  mark(n, false);

  auto score = [&](ClassExpression expr, const detail::Bits& pos, const detail::Bits& neg) {
    ++result.expressions_scored;
    const std::size_t z1 = pos.count();
    const std::size_t z2 = n.size() - neg.count();
    return ScoredExpression{std::move(expr), Ratio(z1 + z2, total), z1, z2};
  };

  detail::TopList best(cfg.top_n);

  std::vector<std::pair<ScoredExpression, std::size_t>> stage1;
  stage1.reserve(ext.size());
  for (std::size_t a = 0; a < ext.size(); ++a) stage1.emplace_back(score(ext[a].expr, ext[a].positives, ext[a].negatives), a);
  std::sort(stage1.begin(), stage1.end(), [](const auto& x, const auto& y) { return ranks_before(x.first, y.first); });
  for (const auto& s : stage1) best.offer(s.first);

  const std::size_t keep = cfg.exhaustive ? stage1.size() : std::min(cfg.beam_width, stage1.size());
  std::vector<std::size_t> beam;
  for (std::size_t i = 0; i < keep; ++i) beam.push_back(stage1[i].second);
  std::sort(beam.begin(), beam.end());

  const std::size_t max_k = std::min(cfg.max_combination_size, beam.size());
  for (std::size_t k = 2; k <= max_k; ++k) {
    std::vector<std::size_t> pick(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = i;
    while (true) {
      std::vector<ClassExpression> members;
      detail::Bits and_pos = ext[beam[pick[0]]].positives, and_neg = ext[beam[pick[0]]].negatives;
      detail::Bits or_pos = and_pos, or_neg = and_neg;
      for (std::size_t i = 0; i < k; ++i) {
        const auto& e = ext[beam[pick[i]]];
        members.push_back(e.expr);
        if (i == 0) continue;
        and_pos &= e.positives;
        and_neg &= e.negatives;
        or_pos |= e.positives;
        or_neg |= e.negatives;
      }
      best.offer(score(ClassExpression::all_of(members), and_pos, and_neg));
      if (cfg.allow_disjunction) best.offer(score(ClassExpression::any_of(std::move(members)), or_pos, or_neg));

      // Next k-combination of beam indices in lexicographic order.
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == beam.size() - k + i - 1) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }

  result.ranked = std::move(best).take();
  return result;
}

}  // namespace conind
