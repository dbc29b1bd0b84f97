#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "fvrule/cli.hpp"
#include "support.hpp"

using testing_support::source_path;
using testing_support::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fvrule");
  std::ostringstream out, err;
  const int code = fvrule::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) { return fvrule::text::read_file(path); }

std::string scripted() { return "scripted:" + source_path("fixtures/demo.jsonl"); }

// train, infer, eval under one directory; returns the artifacts that must be reproducible.
std::vector<std::string> pipeline(const TempDir& dir, int jobs) {
  const auto j = std::to_string(jobs);
  auto r = run_cli({"train", "--dataset", source_path("data/micro.jsonl"), "--provider", scripted(), "--out-library",
                    dir.file("lib.jsonl"), "--trainlog", dir.file("trainlog"), "--log-dir", dir.file("logs"),
                    "--jobs", j});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run_cli({"infer", "--dataset", source_path("data/heldout.jsonl"), "--provider", scripted(), "--library",
               dir.file("lib.jsonl"), "--out", dir.file("pred.jsonl"), "--log-dir", dir.file("logs"), "--jobs", j});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run_cli({"eval", "--dataset", source_path("data/heldout.jsonl"), "--predictions", dir.file("pred.jsonl"),
               "--out-dir", dir.file("eval"), "--log-dir", dir.file("logs"), "--jobs", j});
  EXPECT_EQ(r.code, 0) << r.err;
  return {slurp(dir.file("lib.jsonl")), slurp(dir.file("trainlog.json")), slurp(dir.file("trainlog.csv")),
          slurp(dir.file("pred.jsonl")), slurp(dir.file("eval/report.json")), slurp(dir.file("eval/report.csv"))};
}

}  // namespace

TEST(Cli, TrainWritesLibraryAndTrainlog) {
  TempDir dir;
  const auto r = run_cli({"train", "--dataset", source_path("data/micro.jsonl"), "--provider", scripted(),
                          "--out-library", dir.file("lib.jsonl"), "--log-dir", dir.file("logs")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_FALSE(slurp(dir.file("lib.jsonl")).empty());
  EXPECT_TRUE(std::filesystem::exists(dir.file("logs/trainlog.json")));
  EXPECT_TRUE(std::filesystem::exists(dir.file("logs/trainlog.csv")));
  EXPECT_NE(r.out.find("fixing ratio 1"), std::string::npos) << r.out;
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = run_cli({"train", "--no-such-flag", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run_cli({}).code, 1); }

TEST(Cli, OutOfRangeValueIsUsageError) {
  EXPECT_EQ(run_cli({"oracle-check", "--a", "a", "--b", "a", "--max-len", "0"}).code, 1);
  EXPECT_EQ(run_cli({"infer", "--alpha", "1.5"}).code, 1);
}

TEST(Cli, MissingDatasetIsValidationError) {
  TempDir dir;
  const auto r = run_cli({"train", "--dataset", dir.file("absent.jsonl"), "--provider", scripted(), "--out-library",
                          dir.file("lib.jsonl"), "--log-dir", dir.file("logs")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("absent.jsonl"), std::string::npos);
}

TEST(Cli, InvalidRecordsAreReportedWithLineNumbers) {
  TempDir dir;
  fvrule::text::write_file(dir.file("bad.jsonl"),
                           R"({"id": "a", "nl": "x", "golden_sva": "a |-> b"})" "\n" R"({"id": "b", "nl": "y"})" "\n");
  const auto r = run_cli({"sample", "--dataset", dir.file("bad.jsonl"), "--ratio", "0.5", "--log-dir", dir.file("l")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bad.jsonl:2"), std::string::npos) << r.err;
}

// Provider failures skip the item for that iteration rather than aborting the run.
TEST(Cli, UnscriptedPromptsAreSkippedWithWarnings) {
  TempDir dir;
  fvrule::text::write_file(dir.file("empty.jsonl"), "");
  const auto r = run_cli({"train", "--dataset", source_path("data/micro.jsonl"), "--provider",
                          "scripted:" + dir.file("empty.jsonl"), "--out-library", dir.file("lib.jsonl"), "--log-dir",
                          dir.file("logs")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("no response"), std::string::npos);
  EXPECT_NE(r.out.find("trees committed 0"), std::string::npos) << r.out;
}

TEST(Cli, HttpProviderWithoutKeyIsUsageError) {
  TempDir dir;
  ::unsetenv("FVRULE_CLI_ABSENT_KEY");
  const auto r = run_cli({"train", "--dataset", source_path("data/micro.jsonl"), "--provider", "http",
                          "--api-key-env", "FVRULE_CLI_ABSENT_KEY", "--out-library", dir.file("lib.jsonl"),
                          "--log-dir", dir.file("logs")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("FVRULE_CLI_ABSENT_KEY"), std::string::npos);
}

TEST(Cli, OracleCheckIncomparable) {
  const auto r = run_cli({"oracle-check", "--a", "req |-> gnt", "--b", "req |=> gnt", "--signals", "req,gnt",
                          "--max-len", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("Incomparable\n", 0), 0u) << r.out;
  std::size_t n = 0;
  for (auto p = r.out.find("counterexample:"); p != std::string::npos; p = r.out.find("counterexample:", p + 1)) ++n;
  EXPECT_EQ(n, 2u);
}

TEST(Cli, OracleCheckEquivalentHasNoCounterexample) {
  const auto r = run_cli({"oracle-check", "--a", "req |=> gnt", "--b", "req |-> ##1 gnt", "--max-len", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("Equivalent\n", 0), 0u) << r.out;
  EXPECT_EQ(r.out.find("counterexample"), std::string::npos);
}

TEST(Cli, OracleCheckParseErrorIsUsageError) {
  EXPECT_EQ(run_cli({"oracle-check", "--a", "req |->", "--b", "gnt"}).code, 1);
}

TEST(Cli, ManifestRecordsConfigButNoKey) {
  TempDir dir;
  ::setenv("FVRULE_CLI_TEST_KEY", "sk-cli-test-secret", 1);
  const auto r = run_cli({"train", "--dataset", source_path("data/micro.jsonl"), "--provider", scripted(),
                          "--api-key-env", "FVRULE_CLI_TEST_KEY", "--out-library", dir.file("lib.jsonl"),
                          "--log-dir", dir.file("logs"), "--seed", "7"});
  ::unsetenv("FVRULE_CLI_TEST_KEY");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir.file("logs/manifest.json")));
  EXPECT_EQ(m["subcommand"], "train");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["config"]["http"]["api_key_env"], "FVRULE_CLI_TEST_KEY");
  EXPECT_TRUE(m["versions"].contains("fvrule"));
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (e.is_regular_file()) {
      EXPECT_EQ(slurp(e.path().string()).find("sk-cli-test-secret"), std::string::npos) << e.path();
    }
  }
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
  TempDir dir;
  fvrule::text::write_file(dir.file("cfg.json"), R"({"oracle": {"max_len": 1}})");
  // max_len 1 cannot separate |-> from |=>; the flag restores a useful bound.
  auto r = run_cli({"oracle-check", "--config", dir.file("cfg.json"), "--a", "req |-> gnt", "--b", "req |=> gnt"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto from_config = r.out;
  r = run_cli({"oracle-check", "--config", dir.file("cfg.json"), "--a", "req |-> gnt", "--b", "req |=> gnt",
               "--max-len", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("Incomparable", 0), 0u);
  EXPECT_NE(from_config, r.out);
}

TEST(Cli, MalformedConfigIsUsageError) {
  TempDir dir;
  fvrule::text::write_file(dir.file("cfg.json"), "{not json");
  EXPECT_EQ(run_cli({"oracle-check", "--config", dir.file("cfg.json"), "--a", "a", "--b", "a"}).code, 1);
}

TEST(Cli, PipelineIsByteIdenticalAcrossRunsAndJobs) {
  TempDir a, b, c;
  const auto first = pipeline(a, 1);
  const auto second = pipeline(b, 1);
  const auto parallel = pipeline(c, 4);
  ASSERT_EQ(first.size(), second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_FALSE(first[i].empty()) << i;
    EXPECT_EQ(first[i], second[i]) << i;
    EXPECT_EQ(first[i], parallel[i]) << i;
  }
}

TEST(Cli, HeldoutPredictionIsFunctionallyCorrect) {
  TempDir dir;
  pipeline(dir, 2);
  const auto report = nlohmann::json::parse(slurp(dir.file("eval/report.json")));
  EXPECT_DOUBLE_EQ(report["aggregate"]["func"].get<double>(), 1.0) << report.dump(2);
}

TEST(Cli, EvalWithBaselineWritesReduction) {
  TempDir dir;
  pipeline(dir, 1);
  auto r = run_cli({"eval", "--dataset", source_path("data/heldout.jsonl"), "--predictions", dir.file("pred.jsonl"),
                    "--use-initial", "--out-dir", dir.file("base"), "--log-dir", dir.file("logs")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run_cli({"analyze", "--report", dir.file("eval/report.json"), "--baseline-report", dir.file("base/report.json"),
               "--trainlog", dir.file("trainlog.json"), "--out-dir", dir.file("an"), "--log-dir", dir.file("logs")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir.file("an/reduction.csv")).rfind("category,base,ours,reduction\n", 0), 0u);
  EXPECT_EQ(slurp(dir.file("an/fixing_ratio.csv")).rfind("iteration,", 0), 0u) << slurp(dir.file("an/fixing_ratio.csv"));
}

TEST(Cli, InferWithEmptyLibraryWarnsAndFallsBack) {
  TempDir dir;
  fvrule::text::write_file(dir.file("lib.jsonl"), "");
  const auto r = run_cli({"infer", "--dataset", source_path("data/heldout.jsonl"), "--provider", scripted(),
                          "--library", dir.file("lib.jsonl"), "--log-dir", dir.file("logs")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("empty"), std::string::npos);
  const auto rec = nlohmann::json::parse(r.out.substr(0, r.out.find('\n')));
  EXPECT_EQ(rec["final_sva"], rec["initial_sva"]);
  EXPECT_TRUE(rec["no_applicable_rules"].get<bool>());
}

TEST(Cli, SampleAndSplitAreDeterministic) {
  TempDir dir;
  const auto micro = source_path("data/micro.jsonl");
  const auto s1 = run_cli({"sample", "--dataset", micro, "--ratio", "0.5", "--seed", "3", "--log-dir", dir.file("l")});
  const auto s2 = run_cli({"sample", "--dataset", micro, "--ratio", "0.5", "--seed", "3", "--log-dir", dir.file("l")});
  ASSERT_EQ(s1.code, 0) << s1.err;
  EXPECT_EQ(s1.out, s2.out);
  EXPECT_EQ(fvrule::parse_dataset(s1.out).items.size(), 6u);

  const auto r = run_cli({"split", "--dataset", micro, "--fraction", "0.75", "--train-out", dir.file("tr.jsonl"),
                          "--test-out", dir.file("te.jsonl"), "--log-dir", dir.file("l")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(fvrule::parse_dataset(slurp(dir.file("tr.jsonl"))).items.size(), 9u);
  EXPECT_EQ(fvrule::parse_dataset(slurp(dir.file("te.jsonl"))).items.size(), 3u);
}
