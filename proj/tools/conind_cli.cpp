// conind: label hidden neurons with induced concepts and validate the labels.
//
//   conind run --config run.toml
//   conind partition --activations_path acts.csv --output_dir out
//   conind induce --hierarchy_path h.tsv --annotations_path a.jsonl --output_dir out
//   conind evaluate --eval_manifest_path manifest.jsonl --output_dir out
//   conind report --output_dir out

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "conind/conind.hpp"

namespace {

using conind::detail::write_file;

int partition_stage(const conind::PipelineConfig& cfg) {
  const auto matrix = conind::load_activations(cfg.activations_path);
  const auto parts = conind::partition_all(matrix, cfg.hi_fraction, cfg.lo_fraction);
  for (auto k : parts.skipped) std::cerr << "[partition] warning: neuron " << k << " is dead; skipped\n";
  std::filesystem::create_directories(cfg.output_dir);
  write_file(std::filesystem::path(cfg.output_dir) / "partitions.jsonl", conind::partitions_jsonl(parts));
  std::cout << parts.partitions.size() << " neurons partitioned, " << parts.skipped.size() << " skipped\n";
  return conind::kExitOk;
}

int induce_stage(const conind::PipelineConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  const auto parts = conind::read_partitions((dir / "partitions.jsonl").string());
  auto hierarchy = conind::load_hierarchy(cfg.hierarchy_path);
  auto facts = conind::load_annotations(cfg.annotations_path, hierarchy);
  const conind::KnowledgeBase kb(std::move(hierarchy), std::move(facts));
  const auto ind = conind::induce_all(parts, kb, cfg.induction, cfg.workers);
  write_file(dir / "inductions.jsonl", conind::inductions_jsonl(ind));
  write_file(dir / "induce_errors.jsonl", conind::errors_jsonl(ind.errors));
  for (const auto& e : ind.errors) std::cerr << "[induce] error: neuron " << e.neuron << ": " << e.message << '\n';
  return ind.errors.empty() ? conind::kExitOk : conind::kExitPartial;
}

int evaluate_stage(const conind::PipelineConfig& cfg) {
  if (!cfg.eval_manifest_path) throw conind::InputError("evaluate", 0, "--eval_manifest_path is required");
  const std::filesystem::path dir(cfg.output_dir);
  const auto parts = conind::read_partitions((dir / "partitions.jsonl").string());
  const auto manifest = conind::load_manifest(*cfg.eval_manifest_path);
  const auto ev = conind::evaluate_all(parts, manifest, cfg.tla_threshold_fraction,
                                       {cfg.confirm_fraction, cfg.split_seed}, cfg.workers);
  for (const auto& w : ev.warnings) std::cerr << "[evaluate] warning: " << w << '\n';
  for (const auto& e : ev.errors) std::cerr << "[evaluate] error: neuron " << e.neuron << ": " << e.message << '\n';
  write_file(dir / "evaluation.jsonl", conind::evaluations_jsonl(ev));
  write_file(dir / "evaluation_hits.tsv", conind::hits_tsv(ev));
  write_file(dir / "evaluate_errors.jsonl", conind::errors_jsonl(ev.errors));
  return ev.errors.empty() ? conind::kExitOk : conind::kExitPartial;
}

int report_stage(const conind::PipelineConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  const auto parts = conind::read_partitions((dir / "partitions.jsonl").string());
  auto ind = conind::read_inductions((dir / "inductions.jsonl").string(), parts);
  ind.errors = conind::read_errors((dir / "induce_errors.jsonl").string());
  std::optional<conind::EvaluationOutcome> ev;
  if (std::filesystem::exists(dir / "evaluation.jsonl")) {
    ev = conind::read_evaluations((dir / "evaluation.jsonl").string());
    ev->errors = conind::read_errors((dir / "evaluate_errors.jsonl").string());
  }
  const auto report = conind::build_report(parts, ind, ev);
  conind::write_report(dir, report);
  std::cout << report.table1.size() << " neurons reported, " << report.confirmed.size() << " confirmed\n";
  return report.errors.empty() ? conind::kExitOk : conind::kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Concept-induction labelling of hidden neurons"};
  app.set_config("--config", "", "Config file (TOML/INI); keys equal option names, flags override");
  app.require_subcommand(1);

  conind::PipelineConfig cfg;
  std::string manifest;
  auto& ind = cfg.induction;
  app.add_option("--hierarchy_path", cfg.hierarchy_path, "Concept hierarchy TSV (child<TAB>parent)");
  app.add_option("--annotations_path", cfg.annotations_path, "Image annotations JSON Lines");
  app.add_option("--activations_path", cfg.activations_path, "Activation CSV (image_id,n0,...)");
  app.add_option("--eval_manifest_path", manifest, "Evaluation manifest JSON Lines");
  app.add_option("--output_dir", cfg.output_dir, "Directory for all outputs")->capture_default_str();
  app.add_option("--hi_fraction", cfg.hi_fraction, "Positive-set fraction of the max")->capture_default_str();
  app.add_option("--lo_fraction", cfg.lo_fraction, "Negative-set fraction of the max")->capture_default_str();
  app.add_option("--tla_threshold_fraction", cfg.tla_threshold_fraction, "Firing threshold fraction for TLA")
      ->capture_default_str();
  app.add_option("--confirm_fraction", cfg.confirm_fraction, "Share of evaluation images used for TLA")
      ->capture_default_str();
  app.add_option("--split_seed", cfg.split_seed, "Seed for the evaluation split")->capture_default_str();
  app.add_option("--beam_width", ind.beam_width, "Atoms kept after stage 1")->capture_default_str();
  app.add_option("--max_combination_size", ind.max_combination_size, "Largest And/Or combination")
      ->capture_default_str();
  app.add_option("--top_n", ind.top_n, "Expressions reported per neuron")->capture_default_str();
  app.add_option("--allow_disjunction", ind.allow_disjunction, "Score Or combinations")->capture_default_str();
  app.add_option("--ancestor_depth", ind.ancestor_depth, "Hierarchy levels added above matched concepts")
      ->capture_default_str();
  app.add_flag("--exhaustive", ind.exhaustive, "Keep every atom in the beam");
  app.add_option("--workers", cfg.workers, "Worker threads (0 = hardware)")->capture_default_str();

  auto* run = app.add_subcommand("run", "All stages")->fallthrough();
  auto* partition = app.add_subcommand("partition", "Split images into per-neuron positive/negative sets")->fallthrough();
  auto* induce = app.add_subcommand("induce", "Induce ranked class expressions per neuron")->fallthrough();
  auto* evaluate = app.add_subcommand("evaluate", "TLA, Non-TLA and rank-sum test per label")->fallthrough();
  auto* report = app.add_subcommand("report", "Write table1/table2 TSVs from stage outputs")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? conind::kExitOk : conind::kExitInput;
  }
  if (!manifest.empty()) cfg.eval_manifest_path = manifest;

  try {
    cfg.validate();
  } catch (const conind::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return conind::kExitInput;
  }

  try {
    if (run->parsed()) {
      return conind::run_pipeline(cfg, std::cerr).exit_code;
    }
    if (partition->parsed()) return partition_stage(cfg);
    if (induce->parsed()) return induce_stage(cfg);
    if (evaluate->parsed()) return evaluate_stage(cfg);
    if (report->parsed()) return report_stage(cfg);
  } catch (const conind::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return conind::kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return conind::kExitInternal;
  }
  return conind::kExitInternal;
}
