#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "conind/activations.hpp"
#include "conind/error.hpp"
#include "conind/evaluation.hpp"
#include "conind/induction.hpp"
#include "conind/knowledge_base.hpp"
#include "conind/report.hpp"

namespace conind {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitPartial = 2, kExitInternal = 3 };

struct PipelineConfig {
  std::string hierarchy_path;
  std::string annotations_path;
  std::string activations_path;
  double hi_fraction = 0.8;
  double lo_fraction = 0.2;
  double tla_threshold_fraction = 0.8;
  InductionConfig induction;
  std::optional<std::string> eval_manifest_path;
  std::uint64_t split_seed = 0;
  double confirm_fraction = 0.8;
  std::string output_dir = "out";
  /// 0 picks the hardware concurrency.
  std::size_t workers = 0;

  void validate() const {
    if (!(lo_fraction >= 0.0 && lo_fraction < hi_fraction && hi_fraction <= 1.0))
      throw Error("fractions must satisfy 0 <= lo_fraction < hi_fraction <= 1");
    if (!(tla_threshold_fraction > 0.0 && tla_threshold_fraction <= 1.0))
      throw Error("tla_threshold_fraction must be in (0, 1]");
    if (!(confirm_fraction > 0.0 && confirm_fraction < 1.0)) throw Error("confirm_fraction must be in (0, 1)");
    induction.validate();
  }

  nlohmann::json to_json() const {
    return {{"hierarchy_path", hierarchy_path},
            {"annotations_path", annotations_path},
            {"activations_path", activations_path},
            {"hi_fraction", hi_fraction},
            {"lo_fraction", lo_fraction},
            {"tla_threshold_fraction", tla_threshold_fraction},
            {"beam_width", induction.beam_width},
            {"max_combination_size", induction.max_combination_size},
            {"top_n", induction.top_n},
            {"allow_disjunction", induction.allow_disjunction},
            {"ancestor_depth", induction.ancestor_depth},
            {"exhaustive", induction.exhaustive},
            {"eval_manifest_path", eval_manifest_path ? nlohmann::json(*eval_manifest_path) : nlohmann::json()},
            {"split_seed", split_seed},
            {"confirm_fraction", confirm_fraction},
            {"output_dir", output_dir}};
  }
};

struct NeuronError {
  std::size_t neuron = 0;
  std::string stage;
  std::string message;
};

struct PartitionOutcome {
  std::size_t neurons = 0;
  std::vector<NeuronPartition> partitions;  // live neurons, ascending
  std::vector<std::size_t> skipped;         // dead neurons, ascending
};

struct NeuronInduction {
  std::size_t neuron = 0;
  std::vector<ScoredExpression> ranked;
  bool no_candidates = false;
};

struct InductionOutcome {
  std::vector<NeuronInduction> inductions;
  std::vector<NeuronError> errors;
};

struct EvaluationOutcome {
  std::vector<NeuronEvaluation> evaluations;
  std::vector<NeuronError> errors;
  std::vector<std::string> warnings;
};

struct Report {
  std::vector<Table1Row> table1;
  std::vector<Table1Row> confirmed;
  std::vector<Table2Row> table2;
  std::vector<NeuronError> errors;
  std::vector<std::size_t> skipped;
};

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. `fn` must not throw.
template <class Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

// ---------------------------------------------------------------------------
// Stages

inline PartitionOutcome partition_all(const ActivationMatrix& m, double hi_fraction, double lo_fraction) {
  PartitionOutcome out;
  out.neurons = m.neurons();
  for (std::size_t k = 0; k < m.neurons(); ++k) {
    try {
      out.partitions.push_back(partition_neuron(m, k, hi_fraction, lo_fraction));
    } catch (const DeadNeuron&) {
      out.skipped.push_back(k);
    }
  }
  return out;
}

inline InductionOutcome induce_all(const PartitionOutcome& parts, const KnowledgeBase& kb, const InductionConfig& cfg,
                                   std::size_t workers) {
  const std::size_t n = parts.partitions.size();
  std::vector<std::optional<NeuronInduction>> done(n);
  std::vector<std::optional<NeuronError>> failed(n);
  parallel_for(n, workers, [&](std::size_t i) {
    const auto& p = parts.partitions[i];
    try {
      auto r = induce(p.positive_set, p.negative_set, kb, cfg);
      done[i] = NeuronInduction{p.neuron, std::move(r.ranked), r.no_candidates};
    } catch (const std::exception& e) {
      failed[i] = NeuronError{p.neuron, "induce", e.what()};
    }
  });
  InductionOutcome out;
  for (std::size_t i = 0; i < n; ++i) {
    if (done[i]) out.inductions.push_back(std::move(*done[i]));
    if (failed[i]) out.errors.push_back(std::move(*failed[i]));
  }
  return out;
}

/// Firing threshold per neuron (tla fraction times test-set max); nullopt for dead neurons.
inline std::vector<std::optional<double>> firing_thresholds(const PartitionOutcome& parts, double tla_fraction) {
  std::vector<std::optional<double>> t(parts.neurons);
  for (const auto& p : parts.partitions) t[p.neuron] = tla_fraction * p.max_activation;
  return t;
}

/// Loads every manifest file and evaluates each live neuron's label. Unreadable files and
/// degenerate samples become per-neuron errors; entries naming a neuron outside the matrix
/// are an input error.
inline EvaluationOutcome evaluate_all(const PartitionOutcome& parts, const std::vector<ManifestEntry>& manifest,
                                      double tla_fraction, const EvaluationSettings& settings, std::size_t workers) {
  const auto thresholds = firing_thresholds(parts, tla_fraction);
  EvaluationOutcome out;
  std::vector<LoadedEntry> loaded;
  std::vector<NeuronError> load_errors;
  for (const auto& e : manifest) {
    if (e.neuron >= parts.neurons)
      throw InputError("manifest", 0, "neuron " + std::to_string(e.neuron) + " out of range");
    if (!thresholds[e.neuron]) {
      out.warnings.push_back("neuron " + std::to_string(e.neuron) + " is dead; evaluation entry ignored");
      continue;
    }
    try {
      loaded.push_back(prepare_entry(e, load_activations(e.activations_file), settings));
    } catch (const std::exception& ex) {
      load_errors.push_back({e.neuron, "evaluate", ex.what()});
    }
  }
  std::vector<const LoadedEntry*> all;
  for (const auto& l : loaded) all.push_back(&l);

  std::vector<std::optional<NeuronEvaluation>> done(loaded.size());
  std::vector<std::optional<NeuronError>> failed(loaded.size());
  parallel_for(loaded.size(), workers, [&](std::size_t i) {
    try {
      done[i] = evaluate_neuron(loaded[i], all, thresholds);
    } catch (const std::exception& ex) {
      failed[i] = NeuronError{loaded[i].entry.neuron, "evaluate", ex.what()};
    }
  });
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (done[i]) out.evaluations.push_back(std::move(*done[i]));
    if (failed[i]) out.errors.push_back(std::move(*failed[i]));
  }
  out.errors.insert(out.errors.end(), load_errors.begin(), load_errors.end());
  std::sort(out.evaluations.begin(), out.evaluations.end(),
            [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
  std::sort(out.errors.begin(), out.errors.end(), [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
  return out;
}

/// Assembles report rows. Neurons with any error appear only in `errors`.
inline Report build_report(const PartitionOutcome& parts, const InductionOutcome& ind,
                           const std::optional<EvaluationOutcome>& eval) {
  Report r;
  r.skipped = parts.skipped;
  r.errors = ind.errors;
  if (eval) r.errors.insert(r.errors.end(), eval->errors.begin(), eval->errors.end());
  std::stable_sort(r.errors.begin(), r.errors.end(), [](const auto& a, const auto& b) { return a.neuron < b.neuron; });
  std::set<std::size_t> errored;
  for (const auto& e : r.errors) errored.insert(e.neuron);

  std::map<std::size_t, const NeuronInduction*> by_neuron;
  for (const auto& i : ind.inductions) by_neuron[i.neuron] = &i;
  std::map<std::size_t, const NeuronEvaluation*> evals;
  if (eval)
    for (const auto& e : eval->evaluations) evals[e.neuron] = &e;

  for (const auto& p : parts.partitions) {
    if (errored.count(p.neuron)) continue;
    Table1Row row;
    row.neuron = p.neuron;
    if (auto it = by_neuron.find(p.neuron); it != by_neuron.end() && !it->second->ranked.empty()) {
      row.concepts = serialize_expression(it->second->ranked.front().expr);
      row.coverage = it->second->ranked.front().coverage;
    }
    if (auto it = evals.find(p.neuron); it != evals.end()) {
      const auto& e = *it->second;
      row.tla_pct = e.tla_confirm;
      row.non_tla_pct = e.non_tla_confirm;
      Table2Row t2;
      t2.neuron = p.neuron;
      t2.concepts = e.label;
      t2.tla_pct = e.tla_test;
      t2.non_tla_pct = e.non_tla_test;
      t2.stats = e.stats;
      t2.reject_null = e.significant;
      r.table2.push_back(std::move(t2));
    }
    r.table1.push_back(std::move(row));
  }
  r.confirmed = filter_confirmed(r.table1);
  return r;
}

// ---------------------------------------------------------------------------
// Persistence

namespace detail {

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path, 0, "cannot open");
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path, line_no, e.what());
    }
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace detail

inline std::string partitions_jsonl(const PartitionOutcome& parts) {
  std::map<std::size_t, nlohmann::json> lines;
  for (const auto& p : parts.partitions)
    lines[p.neuron] = {{"neuron", p.neuron},         {"status", "ok"},
                       {"max_activation", p.max_activation}, {"hi_threshold", p.hi_threshold},
                       {"lo_threshold", p.lo_threshold},     {"positive", p.positive_set},
                       {"negative", p.negative_set}};
  for (auto k : parts.skipped) lines[k] = {{"neuron", k}, {"status", "dead"}};
  std::string out;
  for (const auto& [k, j] : lines) out += j.dump() + '\n';
  return out;
}

inline PartitionOutcome read_partitions(const std::string& path) {
  PartitionOutcome out;
  try {
    for (const auto& j : detail::read_jsonl(path)) {
      const auto k = j.at("neuron").get<std::size_t>();
      out.neurons = std::max(out.neurons, k + 1);
      if (j.at("status") == "dead") {
        out.skipped.push_back(k);
        continue;
      }
      NeuronPartition p;
      p.neuron = k;
      p.max_activation = j.at("max_activation").get<double>();
      p.hi_threshold = j.at("hi_threshold").get<double>();
      p.lo_threshold = j.at("lo_threshold").get<double>();
      p.positive_set = j.at("positive").get<std::vector<std::string>>();
      p.negative_set = j.at("negative").get<std::vector<std::string>>();
      out.partitions.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path, 0, e.what());
  }
  return out;
}

inline std::string inductions_jsonl(const InductionOutcome& ind) {
  std::string out;
  for (const auto& n : ind.inductions) {
    for (std::size_t r = 0; r < n.ranked.size(); ++r) {
      const auto& s = n.ranked[r];
      nlohmann::json j = {{"neuron", n.neuron},
                          {"rank", r + 1},
                          {"expr", to_json(s.expr)},
                          {"label", serialize_expression(s.expr)},
                          {"coverage", s.coverage.decimal(3)},
                          {"coverage_fraction", std::to_string(s.coverage.numerator()) + "/" +
                                                    std::to_string(s.coverage.denominator())},
                          {"z1", s.z1},
                          {"z2", s.z2}};
      out += j.dump() + '\n';
    }
  }
  return out;
}

inline std::string errors_jsonl(const std::vector<NeuronError>& errors) {
  std::string out;
  for (const auto& e : errors)
    out += nlohmann::json({{"neuron", e.neuron}, {"stage", e.stage}, {"message", e.message}}).dump() + '\n';
  return out;
}

inline std::vector<NeuronError> read_errors(const std::string& path) {
  std::vector<NeuronError> out;
  if (!std::filesystem::exists(path)) return out;
  for (const auto& j : detail::read_jsonl(path))
    out.push_back({j.at("neuron").get<std::size_t>(), j.at("stage").get<std::string>(),
                   j.at("message").get<std::string>()});
  return out;
}

/// Reads inductions.jsonl back; neurons with no lines get an empty ranking.
inline InductionOutcome read_inductions(const std::string& path, const PartitionOutcome& parts) {
  InductionOutcome out;
  std::map<std::size_t, NeuronInduction> by_neuron;
  try {
    for (const auto& j : detail::read_jsonl(path)) {
      const auto k = j.at("neuron").get<std::size_t>();
      const auto frac = j.at("coverage_fraction").get<std::string>();
      const auto slash = frac.find('/');
      if (slash == std::string::npos) throw InputError(path, 0, "bad coverage_fraction '" + frac + "'");
      ScoredExpression s{expression_from_json(j.at("expr")),
                         Ratio(std::stoull(frac.substr(0, slash)), std::stoull(frac.substr(slash + 1))),
                         j.at("z1").get<std::size_t>(), j.at("z2").get<std::size_t>()};
      auto& n = by_neuron[k];
      n.neuron = k;
      n.ranked.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path, 0, e.what());
  }
  for (const auto& p : parts.partitions) {
    auto it = by_neuron.find(p.neuron);
    if (it == by_neuron.end()) {
      out.inductions.push_back({p.neuron, {}, true});
    } else {
      out.inductions.push_back(std::move(it->second));
    }
  }
  return out;
}

inline nlohmann::json to_json(const MannWhitneyResult& s) {
  return {{"u", s.u_statistic},
          {"z", s.z_score},
          {"p", s.p_value},
          {"target_median", s.target_median},
          {"nontarget_median", s.nontarget_median},
          {"target_mean", s.target_mean},
          {"nontarget_mean", s.nontarget_mean}};
}

inline std::string evaluations_jsonl(const EvaluationOutcome& ev) {
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  std::string out;
  for (const auto& e : ev.evaluations) {
    nlohmann::json j = {{"neuron", e.neuron},
                        {"label", e.label},
                        {"confirm_images", e.confirm_images},
                        {"test_images", e.test_images},
                        {"tla_confirm", e.tla_confirm},
                        {"non_tla_confirm", e.non_tla_confirm},
                        {"tla_test", opt(e.tla_test)},
                        {"non_tla_test", opt(e.non_tla_test)},
                        {"mann_whitney", e.stats ? to_json(*e.stats) : nlohmann::json()},
                        {"confirmed", e.confirmed},
                        {"significant", opt(e.significant)},
                        {"note", e.note}};
    out += j.dump() + '\n';
  }
  return out;
}

/// One row per (neuron, evaluation image): which other neurons met their own threshold.
inline std::string hits_tsv(const EvaluationOutcome& ev) {
  std::ostringstream out;
  out << "neuron_id\timage_id\tsplit\thits\tothers\tfiring_neurons\n";
  for (const auto& e : ev.evaluations) {
    for (const auto& h : e.hits) {
      out << e.neuron << '\t' << h.image_id << '\t' << (h.confirm_split ? "confirm" : "test") << '\t'
          << h.firing.size() << '\t' << h.others << '\t';
      for (std::size_t i = 0; i < h.firing.size(); ++i) out << (i ? "," : "") << h.firing[i];
      out << '\n';
    }
  }
  return out.str();
}

inline EvaluationOutcome read_evaluations(const std::string& path) {
  EvaluationOutcome out;
  try {
    for (const auto& j : detail::read_jsonl(path)) {
      NeuronEvaluation e;
      e.neuron = j.at("neuron").get<std::size_t>();
      e.label = j.at("label").get<std::string>();
      e.confirm_images = j.at("confirm_images").get<std::size_t>();
      e.test_images = j.at("test_images").get<std::size_t>();
      e.tla_confirm = j.at("tla_confirm").get<double>();
      e.non_tla_confirm = j.at("non_tla_confirm").get<double>();
      if (!j.at("tla_test").is_null()) e.tla_test = j["tla_test"].get<double>();
      if (!j.at("non_tla_test").is_null()) e.non_tla_test = j["non_tla_test"].get<double>();
      if (const auto& mw = j.at("mann_whitney"); !mw.is_null()) {
        MannWhitneyResult s;
        s.u_statistic = mw.at("u").get<double>();
        s.z_score = mw.at("z").get<double>();
        s.p_value = mw.at("p").get<double>();
        s.target_median = mw.at("target_median").get<double>();
        s.nontarget_median = mw.at("nontarget_median").get<double>();
        s.target_mean = mw.at("target_mean").get<double>();
        s.nontarget_mean = mw.at("nontarget_mean").get<double>();
        e.stats = s;
      }
      e.confirmed = j.at("confirmed").get<bool>();
      if (!j.at("significant").is_null()) e.significant = j["significant"].get<bool>();
      e.note = j.at("note").get<std::string>();
      out.evaluations.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path, 0, e.what());
  }
  return out;
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path, 0, "cannot open for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

inline std::string table1_tsv(const std::vector<Table1Row>& rows) {
  std::ostringstream out;
  write_table1(out, rows);
  return out.str();
}

inline std::string table2_tsv(const std::vector<Table2Row>& rows) {
  std::ostringstream out;
  write_table2(out, rows);
  return out.str();
}

/// Writes table1.tsv, table1_confirmed.tsv and table2.tsv, then re-parses them strictly.
inline void write_report(const std::filesystem::path& dir, const Report& r) {
  const auto t1 = table1_tsv(r.table1);
  const auto t1c = table1_tsv(r.confirmed);
  const auto t2 = table2_tsv(r.table2);
  detail::write_file(dir / "table1.tsv", t1);
  detail::write_file(dir / "table1_confirmed.tsv", t1c);
  detail::write_file(dir / "table2.tsv", t2);
  for (const auto& name : {"table1.tsv", "table1_confirmed.tsv"}) {
    std::ifstream in(dir / name);
    validate_table1(in);
  }
  std::ifstream in(dir / "table2.tsv");
  validate_table2(in);
}

struct RunSummary {
  int exit_code = kExitOk;
  Report report;
};

/// End-to-end run: load, partition, induce, evaluate (when a manifest is given), report.
/// Diagnostics go to `log`, tagged with the failing stage.
inline RunSummary run_pipeline(const PipelineConfig& cfg, std::ostream& log) {
  RunSummary summary;
  std::string stage = "config";
  try {
    cfg.validate();
    stage = "load";
    const auto matrix = load_activations(cfg.activations_path);
    auto hierarchy = load_hierarchy(cfg.hierarchy_path);
    auto facts = load_annotations(cfg.annotations_path, hierarchy);
    for (const auto& f : facts)
      for (const auto& u : f.unmatched_labels) log << "[load] warning: " << f.image_id << ": unmatched label '" << u << "'\n";
    const KnowledgeBase kb(std::move(hierarchy), std::move(facts));
    std::vector<ManifestEntry> manifest;
    if (cfg.eval_manifest_path) manifest = load_manifest(*cfg.eval_manifest_path);

    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);

    stage = "partition";
    const auto parts = partition_all(matrix, cfg.hi_fraction, cfg.lo_fraction);
    for (auto k : parts.skipped) log << "[partition] warning: neuron " << k << " is dead; skipped\n";
    for (const auto& id : matrix.image_ids())
      if (!kb.contains(id)) throw InputError(cfg.annotations_path, 0, "no annotations for image '" + id + "'");
    detail::write_file(dir / "partitions.jsonl", partitions_jsonl(parts));

    stage = "induce";
    const auto ind = induce_all(parts, kb, cfg.induction, cfg.workers);
    for (const auto& n : ind.inductions)
      if (n.no_candidates) log << "[induce] warning: neuron " << n.neuron << " has no candidate concepts\n";
    detail::write_file(dir / "inductions.jsonl", inductions_jsonl(ind));
    detail::write_file(dir / "induce_errors.jsonl", errors_jsonl(ind.errors));

    std::optional<EvaluationOutcome> eval;
    if (cfg.eval_manifest_path) {
      stage = "evaluate";
      eval = evaluate_all(parts, manifest, cfg.tla_threshold_fraction, {cfg.confirm_fraction, cfg.split_seed},
                          cfg.workers);
      for (const auto& w : eval->warnings) log << "[evaluate] warning: " << w << '\n';
      detail::write_file(dir / "evaluation.jsonl", evaluations_jsonl(*eval));
      detail::write_file(dir / "evaluation_hits.tsv", hits_tsv(*eval));
      detail::write_file(dir / "evaluate_errors.jsonl", errors_jsonl(eval->errors));
    }

    stage = "report";
    summary.report = build_report(parts, ind, eval);
    for (const auto& e : summary.report.errors)
      log << "[" << e.stage << "] error: neuron " << e.neuron << ": " << e.message << '\n';
    write_report(dir, summary.report);

    nlohmann::json inputs = {
        {"hierarchy", {{"path", cfg.hierarchy_path}, {"sha256", sha256_file(cfg.hierarchy_path)}}},
        {"annotations", {{"path", cfg.annotations_path}, {"sha256", sha256_file(cfg.annotations_path)}}},
        {"activations", {{"path", cfg.activations_path}, {"sha256", sha256_file(cfg.activations_path)}}}};
    if (cfg.eval_manifest_path) {
      inputs["eval_manifest"] = {{"path", *cfg.eval_manifest_path}, {"sha256", sha256_file(*cfg.eval_manifest_path)}};
      nlohmann::json files = nlohmann::json::array();
      for (const auto& e : manifest) {
        nlohmann::json f = {{"neuron", e.neuron}, {"path", e.activations_file}};
        f["sha256"] = std::filesystem::exists(e.activations_file) ? nlohmann::json(sha256_file(e.activations_file))
                                                                   : nlohmann::json();
        files.push_back(std::move(f));
      }
      inputs["eval_files"] = std::move(files);
    }
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& e : summary.report.errors)
      errors.push_back({{"neuron", e.neuron}, {"stage", e.stage}, {"message", e.message}});
    std::size_t significant = 0;
    for (const auto& row : summary.report.table2) significant += (row.reject_null && *row.reject_null) ? 1 : 0;
    const nlohmann::json manifest_json = {
        {"tool", "conind"},
        {"version", kToolVersion},
        {"config", cfg.to_json()},
        {"inputs", std::move(inputs)},
        {"neurons", parts.neurons},
        {"skipped_neurons", parts.skipped},
        {"neuron_errors", std::move(errors)},
        {"counts",
         {{"reported", summary.report.table1.size()},
          {"confirmed", summary.report.confirmed.size()},
          {"significant", significant}}}};
    detail::write_file(dir / "run_manifest.json", manifest_json.dump(2) + '\n');

    summary.exit_code = summary.report.errors.empty() ? kExitOk : kExitPartial;
  } catch (const InputError& e) {
    log << "[" << stage << "] input error: " << e.what() << '\n';
    summary.exit_code = kExitInput;
  } catch (const Error& e) {
    log << "[" << stage << "] error: " << e.what() << '\n';
    summary.exit_code = stage == "config" || stage == "load" ? kExitInput : kExitInternal;
  } catch (const std::exception& e) {
    log << "[" << stage << "] internal error: " << e.what() << '\n';
    summary.exit_code = kExitInternal;
  }
  return summary;
}

}  // namespace conind
