#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "conind/activations.hpp"
#include "conind/error.hpp"
#include "conind/label.hpp"
#include "conind/stats.hpp"

namespace conind {

/// One line of the evaluation manifest: the activation dump of images retrieved for `label`.
struct ManifestEntry {
  std::size_t neuron = 0;
  std::string label;
  std::string activations_file;
};

/// Reads `{"neuron": k, "label": "...", "activations_file": "..."}` lines. Relative file paths
/// resolve against the manifest's directory.
inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                                                 const std::string& source = "<manifest>") {
  std::vector<ManifestEntry> out;
  std::unordered_set<std::size_t> seen;
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
    if (!j.is_object() || !j.contains("neuron") || !j["neuron"].is_number_unsigned() || !j.contains("label") ||
        !j["label"].is_string() || !j.contains("activations_file") || !j["activations_file"].is_string())
      throw InputError(source, line_no,
                       "expected {\"neuron\": int, \"label\": string, \"activations_file\": string}");
    ManifestEntry e;
    e.neuron = j["neuron"].get<std::size_t>();
    e.label = j["label"].get<std::string>();
    std::filesystem::path file = j["activations_file"].get<std::string>();
    e.activations_file = (file.is_relative() ? base_dir / file : file).lexically_normal().string();
    if (!seen.insert(e.neuron).second)
      throw InputError(source, line_no, "neuron " + std::to_string(e.neuron) + " listed twice");
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open evaluation manifest");
  return parse_manifest(in, std::filesystem::path(path).parent_path(), path);
}

/// Per-image record of which other analyzed neurons fired (kept so other Non-TLA aggregations
/// can be recomputed).
struct HitRecord {
  std::string image_id;
  bool confirm_split = true;
  std::vector<std::size_t> firing;
  std::size_t others = 0;
};

struct NeuronEvaluation {
  std::size_t neuron = 0;
  std::string label;
  std::size_t confirm_images = 0;
  std::size_t test_images = 0;
  double tla_confirm = 0.0;
  double non_tla_confirm = 0.0;
  std::optional<double> tla_test;
  std::optional<double> non_tla_test;
  std::optional<MannWhitneyResult> stats;
  bool confirmed = false;
  std::optional<bool> significant;
  std::string note;
  std::vector<HitRecord> hits;
};

struct EvaluationSettings {
  double confirm_fraction = 0.8;
  std::uint64_t seed = 0;
};

/// Labelled activation dump after the confirm/test split.
struct LoadedEntry {
  ManifestEntry entry;
  ActivationMatrix matrix;
  EvalSplit split;
};

/// Split seed for one neuron's image set, decorrelated from neighbouring neurons.
inline std::uint64_t split_seed(std::uint64_t seed, std::size_t neuron) {
  return seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(neuron) + 1));
}

inline LoadedEntry prepare_entry(ManifestEntry entry, ActivationMatrix matrix, const EvaluationSettings& settings) {
  if (matrix.images() == 0) throw Error("evaluation file '" + entry.activations_file + "' has no images");
  auto split = split_eval_set(matrix.image_ids(), settings.confirm_fraction, split_seed(settings.seed, entry.neuron));
  return {std::move(entry), std::move(matrix), std::move(split)};
}

/// Validates one neuron's label against its retrieved images.
///
/// `thresholds[j]` is the firing threshold of neuron j (tla fraction times its test-set
/// maximum), or nullopt for neurons that are not analyzed. TLA and Non-TLA are computed on
/// both splits; the rank-sum test runs on the test split, with non-target values drawn from
/// the test splits of entries whose label differs.
inline NeuronEvaluation evaluate_neuron(const LoadedEntry& self, const std::vector<const LoadedEntry*>& all,
                                        const std::vector<std::optional<double>>& thresholds) {
  const std::size_t k = self.entry.neuron;
  if (k >= thresholds.size() || !thresholds[k]) throw Error("neuron " + std::to_string(k) + " is not analyzed");
  if (self.matrix.neurons() != thresholds.size())
    throw Error("evaluation file '" + self.entry.activations_file + "' has " + std::to_string(self.matrix.neurons()) +
                " neurons, expected " + std::to_string(thresholds.size()));

  NeuronEvaluation ev;
  ev.neuron = k;
  ev.label = self.entry.label;
  ev.confirm_images = self.split.confirm.size();
  ev.test_images = self.split.test.size();

  std::size_t others = 0;
  for (std::size_t j = 0; j < thresholds.size(); ++j) others += (j != k && thresholds[j]) ? 1 : 0;

  auto activations_of = [](const LoadedEntry& e, const std::vector<std::string>& ids, std::size_t neuron) {
    std::vector<double> v;
    v.reserve(ids.size());
    for (const auto& id : ids) v.push_back(e.matrix.at(e.matrix.row_of(id), neuron));
    return v;
  };

  auto hit_pass = [&](const std::vector<std::string>& ids, bool confirm) {
    std::vector<OtherNeuronHits> counts;
    for (const auto& id : ids) {
      const auto row = self.matrix.row(self.matrix.row_of(id));
      HitRecord rec{id, confirm, {}, others};
      for (std::size_t j = 0; j < thresholds.size(); ++j)
        if (j != k && thresholds[j] && row[j] >= *thresholds[j]) rec.firing.push_back(j);
      counts.push_back({rec.firing.size(), others});
      ev.hits.push_back(std::move(rec));
    }
    return counts;
  };

  const double threshold = *thresholds[k];
  ev.tla_confirm = tla(activations_of(self, self.split.confirm, k), threshold);
  ev.confirmed = ev.tla_confirm >= 80.0;
  const auto confirm_hits = hit_pass(self.split.confirm, true);
  if (others > 0) ev.non_tla_confirm = non_tla(confirm_hits);

  if (self.split.test.empty()) {
    ev.note = "test split empty; statistical test skipped";
    return ev;
  }
  const auto target = activations_of(self, self.split.test, k);
  ev.tla_test = tla(target, threshold);
  const auto test_hits = hit_pass(self.split.test, false);
  if (others > 0) ev.non_tla_test = non_tla(test_hits);
  else ev.non_tla_test = 0.0;

  const std::string own_label = normalize_label(self.entry.label);
  std::vector<double> nontarget;
  for (const LoadedEntry* other : all) {
    if (other == &self || normalize_label(other->entry.label) == own_label) continue;
    if (other->matrix.neurons() != thresholds.size()) continue;
    const auto v = activations_of(*other, other->split.test, k);
    nontarget.insert(nontarget.end(), v.begin(), v.end());
  }
  if (nontarget.empty()) {
    ev.note = "no non-target images; statistical test skipped";
    return ev;
  }
  ev.stats = mann_whitney(target, nontarget);
  ev.significant = decide(*ev.tla_test, *ev.stats).significant;
  return ev;
}

}  // namespace conind
