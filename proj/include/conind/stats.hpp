#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conind/error.hpp"

namespace conind {

struct EvalSplit {
  std::vector<std::string> confirm;
  std::vector<std::string> test;
};

/// Seeded Fisher-Yates shuffle, then the first ceil(fraction * n) ids go to the confirm set.
///
/// Index draws use rejection sampling on raw mt19937_64 output so the split is identical
/// across standard libraries.
inline EvalSplit split_eval_set(std::span<const std::string> ids, double confirm_fraction, std::uint64_t seed) {
  if (ids.empty()) throw Error("cannot split an empty evaluation set");
  if (!(confirm_fraction > 0.0 && confirm_fraction < 1.0)) throw Error("confirm_fraction must be in (0, 1)");
  std::vector<std::string> order(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::uint64_t bound = i + 1;
    const std::uint64_t limit = std::mt19937_64::max() - (std::mt19937_64::max() % bound);
    std::uint64_t draw;
    do {
      draw = rng();
    } while (draw >= limit);
    std::swap(order[i], order[draw % bound]);
  }
  // The epsilon keeps 0.8 * 100 at 80 despite binary rounding.
  auto n_confirm = static_cast<std::size_t>(std::ceil(confirm_fraction * static_cast<double>(order.size()) - 1e-9));
  n_confirm = std::clamp<std::size_t>(n_confirm, 1, order.size());
  EvalSplit split;
  split.confirm.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_confirm));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_confirm), order.end());
  return split;
}

/// Target label activation: percentage of activations at or above `threshold`.
inline double tla(std::span<const double> activations, double threshold) {
  if (activations.empty()) throw Error("TLA of an empty activation list");
  if (!(threshold > 0.0)) throw Error("TLA threshold must be positive");
  const auto hits = std::count_if(activations.begin(), activations.end(), [&](double a) { return a >= threshold; });
  return 100.0 * static_cast<double>(hits) / static_cast<double>(activations.size());
}

/// For one image: how many of the other analyzed neurons met their own threshold.
struct OtherNeuronHits {
  std::size_t hits = 0;
  std::size_t others = 0;
};

/// Mean over images of the fraction of other neurons firing, as a percentage.
inline double non_tla(std::span<const OtherNeuronHits> per_image) {
  if (per_image.empty()) throw Error("non-TLA of an empty image list");
  double sum = 0.0;
  for (const auto& h : per_image) {
    if (h.others == 0) throw Error("non-TLA needs at least one other neuron");
    if (h.hits > h.others) throw Error("hit count exceeds neuron count");
    sum += static_cast<double>(h.hits) / static_cast<double>(h.others);
  }
  return 100.0 * sum / static_cast<double>(per_image.size());
}

/// 2 * Phi(-|z|), computed as erfc(|z| / sqrt(2)).
inline double normal_two_sided_p(double z) {
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

struct MannWhitneyResult {
  double u_statistic = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  double target_median = 0.0;
  double nontarget_median = 0.0;
  double target_mean = 0.0;
  double nontarget_mean = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace detail

/// Two-sample rank-sum test with normal approximation.
///
/// U counts pairs where the target value is below the non-target value (ties count 1/2), so
/// targets that activate more strongly push U below n*m/2 and z negative. Variance carries the
/// tie correction; z has a 0.5 continuity correction toward the mean.
inline MannWhitneyResult mann_whitney(std::span<const double> target, std::span<const double> nontarget) {
  if (target.empty() || nontarget.empty()) throw Error("Mann-Whitney needs two non-empty samples");
  const std::size_t n = target.size();
  const std::size_t m = nontarget.size();
  const std::size_t total = n + m;

  std::vector<std::pair<double, bool>> pooled;
  pooled.reserve(total);
  for (double v : target) pooled.emplace_back(v, true);
  for (double v : nontarget) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  // Midranks; accumulate target rank sum and the tie term sum(t^3 - t).
  double target_rank_sum = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j < total && pooled[j].first == pooled[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second) target_rank_sum += midrank;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  const double td = static_cast<double>(total);
  // Pairs with target above non-target, then flipped to the "target below" orientation.
  const double u_above = target_rank_sum - nd * (nd + 1.0) / 2.0;
  const double u = nd * md - u_above;
  const double mu = nd * md / 2.0;
  const double variance = nd * md / 12.0 * ((td + 1.0) - tie_term / (td * (td - 1.0)));
  if (!(variance > 0.0)) throw DegenerateSample("all pooled values are identical");
  const double sigma = std::sqrt(variance);

  double correction = 0.0;
  if (u < mu) correction = 0.5;
  if (u > mu) correction = -0.5;

  MannWhitneyResult r;
  r.u_statistic = u;
  r.z_score = (u + correction - mu) / sigma;
  r.p_value = normal_two_sided_p(r.z_score);
  r.target_median = detail::median({target.begin(), target.end()});
  r.nontarget_median = detail::median({nontarget.begin(), nontarget.end()});
  r.target_mean = detail::mean(target);
  r.nontarget_mean = detail::mean(nontarget);
  return r;
}

struct NeuronDecision {
  double tla_pct = 0.0;
  double non_tla_pct = 0.0;
  bool confirmed = false;
  bool significant = false;
};

/// confirmed: TLA >= 80 (inclusive). significant: p < 0.05 (strict) and z < 0.
inline NeuronDecision decide(double tla_pct, const MannWhitneyResult& result, double non_tla_pct = 0.0) {
  NeuronDecision d;
  d.tla_pct = tla_pct;
  d.non_tla_pct = non_tla_pct;
  d.confirmed = tla_pct >= 80.0;
  d.significant = result.p_value < 0.05 && result.z_score < 0.0;
  return d;
}

}  // namespace conind
