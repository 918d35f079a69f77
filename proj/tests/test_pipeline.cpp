#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "conind/pipeline.hpp"

using namespace conind;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = CONIND_FIXTURES;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("conind_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

PipelineConfig fixture_config(const fs::path& out, bool with_eval = true) {
  PipelineConfig cfg;
  cfg.hierarchy_path = (kFixtures / "hierarchy.tsv").string();
  cfg.annotations_path = (kFixtures / "annotations.jsonl").string();
  cfg.activations_path = (kFixtures / "activations.csv").string();
  if (with_eval) cfg.eval_manifest_path = (kFixtures / "eval_manifest.jsonl").string();
  cfg.split_seed = 42;
  cfg.output_dir = out.string();
  cfg.workers = 2;
  return cfg;
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    rows.push_back(fields);
  }
  return rows;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CONIND_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Pipeline, FixtureRunLabelsEveryNeuron) {
  const auto out = fresh_dir("fixture");
  std::ostringstream log;
  const auto summary = run_pipeline(fixture_config(out), log);
  ASSERT_EQ(summary.exit_code, kExitOk) << log.str();

  const auto t1 = read_tsv(out / "table1.tsv");
  ASSERT_EQ(t1.size(), 4u);  // header + 3 neurons
  EXPECT_EQ(t1[1][0], "0");
  EXPECT_EQ(t1[1][1], "snowy_mountain");
  EXPECT_EQ(t1[1][2], "1.000");
  EXPECT_EQ(t1[2][1], "skyscraper");
  EXPECT_EQ(t1[3][1], "toilet");

  const auto t2 = read_tsv(out / "table2.tsv");
  ASSERT_EQ(t2.size(), 4u);
  EXPECT_EQ(t2[0].size(), 11u);
  for (const char* f : {"partitions.jsonl", "inductions.jsonl", "evaluation.jsonl", "evaluation_hits.tsv",
                        "table1_confirmed.tsv", "run_manifest.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;

  const auto manifest = nlohmann::json::parse(slurp(out / "run_manifest.json"));
  EXPECT_EQ(manifest["version"], kToolVersion);
  EXPECT_EQ(manifest["inputs"]["activations"]["sha256"].get<std::string>().size(), 64u);
  EXPECT_TRUE(manifest["skipped_neurons"].empty());
  EXPECT_NE(log.str().find("unmatched label 'sky'"), std::string::npos);
}

TEST(Pipeline, InductionLinesFollowContract) {
  const auto out = fresh_dir("contract");
  std::ostringstream log;
  ASSERT_EQ(run_pipeline(fixture_config(out, false), log).exit_code, kExitOk) << log.str();
  std::ifstream in(out / "inductions.jsonl");
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j["neuron"], 0);
  EXPECT_EQ(j["rank"], 1);
  EXPECT_EQ(j["label"], "snowy_mountain");
  EXPECT_EQ(j["coverage"], "1.000");
  EXPECT_EQ(j["expr"], nlohmann::json::parse(R"({"atom": "snowy_mountain"})"));
  EXPECT_TRUE(j["z1"].is_number_integer());
  EXPECT_TRUE(j["z2"].is_number_integer());
  // Without an evaluation manifest TLA columns are NA and table2 is header-only.
  const auto t1 = read_tsv(out / "table1.tsv");
  EXPECT_EQ(t1[1][3], "NA");
  EXPECT_EQ(read_tsv(out / "table2.tsv").size(), 1u);
}

TEST(Pipeline, ByteIdenticalAcrossRuns) {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  std::ostringstream log;
  auto cfg_b = fixture_config(b);
  cfg_b.workers = 1;
  ASSERT_EQ(run_pipeline(fixture_config(a), log).exit_code, kExitOk);
  ASSERT_EQ(run_pipeline(cfg_b, log).exit_code, kExitOk);
  for (const char* f : {"table1.tsv", "table2.tsv", "table1_confirmed.tsv", "partitions.jsonl", "inductions.jsonl",
                        "evaluation.jsonl", "evaluation_hits.tsv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Pipeline, SeedChangesSplitOnly) {
  const auto a = fresh_dir("seed_a");
  const auto b = fresh_dir("seed_b");
  std::ostringstream log;
  auto cfg = fixture_config(b);
  cfg.split_seed = 7;
  ASSERT_EQ(run_pipeline(fixture_config(a), log).exit_code, kExitOk);
  ASSERT_EQ(run_pipeline(cfg, log).exit_code, kExitOk);
  EXPECT_EQ(slurp(a / "inductions.jsonl"), slurp(b / "inductions.jsonl"));
  EXPECT_NE(slurp(a / "evaluation_hits.tsv"), slurp(b / "evaluation_hits.tsv"));
}

TEST(Pipeline, DeadNeuronSkipped) {
  const auto out = fresh_dir("dead");
  const auto acts = out / "acts.csv";
  {
    std::ifstream in(kFixtures / "activations.csv");
    std::ofstream o(acts);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      o << line << (header ? ",n3" : ",0") << '\n';
      header = false;
    }
  }
  auto cfg = fixture_config(out / "run", false);
  cfg.activations_path = acts.string();
  std::ostringstream log;
  const auto summary = run_pipeline(cfg, log);
  ASSERT_EQ(summary.exit_code, kExitOk) << log.str();
  EXPECT_EQ(read_tsv(out / "run" / "table1.tsv").size(), 4u);
  const auto manifest = nlohmann::json::parse(slurp(out / "run" / "run_manifest.json"));
  EXPECT_EQ(manifest["skipped_neurons"], nlohmann::json::array({3}));
  EXPECT_NE(log.str().find("neuron 3 is dead"), std::string::npos);
}

TEST(Pipeline, CorruptEvaluationFileIsolated) {
  const auto out = fresh_dir("corrupt");
  {
    std::ofstream bad(out / "bad.csv");
    bad << "image_id,n0,n1,n2\nx,1,2\n";
    std::ofstream m(out / "manifest.jsonl");
    for (const auto& line : {std::string(R"({"neuron": 0, "label": "snowy_mountain", "activations_file": ")") +
                                 (kFixtures / "eval/snowy_mountain.csv").string() + "\"}",
                             std::string(R"({"neuron": 1, "label": "skyscraper", "activations_file": "bad.csv"})"),
                             std::string(R"({"neuron": 2, "label": "toilet", "activations_file": ")") +
                                 (kFixtures / "eval/toilet.csv").string() + "\"}"})
      m << line << '\n';
  }
  auto cfg = fixture_config(out / "run");
  cfg.eval_manifest_path = (out / "manifest.jsonl").string();
  std::ostringstream log;
  const auto summary = run_pipeline(cfg, log);
  EXPECT_EQ(summary.exit_code, kExitPartial);
  ASSERT_EQ(summary.report.errors.size(), 1u);
  EXPECT_EQ(summary.report.errors[0].neuron, 1u);
  EXPECT_EQ(summary.report.errors[0].stage, "evaluate");
  const auto t1 = read_tsv(out / "run" / "table1.tsv");
  ASSERT_EQ(t1.size(), 3u);
  EXPECT_EQ(t1[1][0], "0");
  EXPECT_EQ(t1[2][0], "2");
  EXPECT_EQ(read_tsv(out / "run" / "table2.tsv").size(), 3u);
  EXPECT_NE(log.str().find("[evaluate] error: neuron 1"), std::string::npos);
}

TEST(Pipeline, EveryNeuronAccountedForOnce) {
  const auto out = fresh_dir("accounting");
  std::ostringstream log;
  const auto summary = run_pipeline(fixture_config(out), log);
  std::multiset<std::size_t> seen;
  for (const auto& r : summary.report.table1) seen.insert(r.neuron);
  for (auto k : summary.report.skipped) seen.insert(k);
  for (const auto& e : summary.report.errors) seen.insert(e.neuron);
  EXPECT_EQ(seen, (std::multiset<std::size_t>{0, 1, 2}));
}

TEST(Pipeline, MissingInputIsInputError) {
  auto cfg = fixture_config(fresh_dir("missing"));
  cfg.hierarchy_path = "/nonexistent/h.tsv";
  std::ostringstream log;
  EXPECT_EQ(run_pipeline(cfg, log).exit_code, kExitInput);
  EXPECT_NE(log.str().find("[load]"), std::string::npos);

  cfg = fixture_config(fresh_dir("badcfg"));
  cfg.hi_fraction = 0.1;
  EXPECT_EQ(run_pipeline(cfg, log).exit_code, kExitInput);
}

TEST(FilterConfirmed, BoundaryRule) {
  std::vector<Table1Row> rows(3);
  rows[0].neuron = 0;
  rows[0].tla_pct = 95.0;
  rows[1].neuron = 1;
  rows[1].tla_pct = 79.9;
  rows[2].neuron = 2;
  rows[2].tla_pct = 80.0;
  const auto kept = filter_confirmed(rows);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].neuron, 0u);
  EXPECT_EQ(kept[1].neuron, 2u);
  EXPECT_TRUE(filter_confirmed({}).empty());
}

TEST(Report, Formatting) {
  EXPECT_EQ(format_p(0.26788), "0.26788");
  EXPECT_EQ(format_p(3e-6), "<0.00001");
  EXPECT_EQ(format_z(-6.181), "-6.18");
  EXPECT_EQ(format_z(-0.001), "0.00");
  EXPECT_EQ(format_percent(81.25), "81.25");
  EXPECT_EQ(Ratio(986, 1000).decimal(3), "0.986");
}

TEST(Report, StrictParserRejectsMalformedTables) {
  auto t1 = [](const std::string& body) {
    std::istringstream in(std::string(table1_header()) + "\n" + body);
    validate_table1(in);
  };
  EXPECT_NO_THROW(t1("0\tsnowy_mountain\t0.986\t95.00\t52.57\n3\tNA\tNA\tNA\tNA\n"));
  EXPECT_THROW(t1("0\tx\t0.98\t95.00\t52.57\n"), Error);
  EXPECT_THROW(t1("0\tx\t0.986\t95.00\n"), Error);
  EXPECT_THROW(t1("1\tx\t0.986\t95.00\t1.00\n0\ty\t0.986\t95.00\t1.00\n"), Error);
  std::istringstream wrong_header("neuron\tconcepts\n");
  EXPECT_THROW(validate_table1(wrong_header), Error);

  std::istringstream t2(std::string(table2_header()) + "\n" +
                        "28\tcars\t95.00\t72.78\t1.58\t1.03\t1.66\t1.59\t-1.10\t0.26788\tno\n"
                        "47\tcrosswalk\t95.00\t22.94\t3.20\t0.00\t3.20\t0.29\t-6.74\t<0.00001\tyes\n");
  EXPECT_NO_THROW(validate_table2(t2));
}

TEST(Cli, StagesReproduceRun) {
  const auto full = fresh_dir("cli_run");
  const auto staged = fresh_dir("cli_staged");
  const std::string inputs = " --hierarchy_path " + (kFixtures / "hierarchy.tsv").string() + " --annotations_path " +
                             (kFixtures / "annotations.jsonl").string() + " --activations_path " +
                             (kFixtures / "activations.csv").string() + " --eval_manifest_path " +
                             (kFixtures / "eval_manifest.jsonl").string() + " --split_seed 42";
  ASSERT_EQ(run_cli("run" + inputs + " --output_dir " + full.string()), 0);
  for (const char* stage : {"partition", "induce", "evaluate", "report"})
    ASSERT_EQ(run_cli(std::string(stage) + inputs + " --output_dir " + staged.string()), 0) << stage;
  for (const char* f : {"table1.tsv", "table2.tsv", "table1_confirmed.tsv", "inductions.jsonl", "evaluation.jsonl"})
    EXPECT_EQ(slurp(full / f), slurp(staged / f)) << f;
}

TEST(Cli, ConfigFileWithOverride) {
  const auto out = fresh_dir("cli_config");
  const auto cfg = out / "run.toml";
  {
    std::ofstream o(cfg);
    o << "hierarchy_path = \"" << (kFixtures / "hierarchy.tsv").string() << "\"\n"
      << "annotations_path = \"" << (kFixtures / "annotations.jsonl").string() << "\"\n"
      << "activations_path = \"" << (kFixtures / "activations.csv").string() << "\"\n"
      << "output_dir = \"" << (out / "ignored").string() << "\"\n"
      << "top_n = 2\n";
  }
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --output_dir " + (out / "used").string()), 0);
  EXPECT_TRUE(fs::exists(out / "used" / "table1.tsv"));
  EXPECT_FALSE(fs::exists(out / "ignored"));
  const auto manifest = nlohmann::json::parse(slurp(out / "used" / "run_manifest.json"));
  EXPECT_EQ(manifest["config"]["top_n"], 2);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli("run --activations_path /nonexistent.csv --output_dir " + fresh_dir("cli_exit").string()), 1);
  EXPECT_EQ(run_cli("--bogus-flag"), 1);
  EXPECT_EQ(run_cli("partition --lo_fraction 0.9 --activations_path x"), 1);
}
