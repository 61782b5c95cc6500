// Copyright 2026 The Faultinj Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "faultinj/code_model.hpp"
#include "faultinj/scanner.hpp"
#include "faultinj/util.hpp"
#include "json.hpp"
#include "support/test_util.hpp"

namespace faultinj {
namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::vector<std::string>& args,
                  const std::map<std::string, std::string>& env = {}) {
  testing::TempDir dir("cli");
  SpawnSpec spec;
  spec.argv = {testing::cli_path()};
  for (const auto& a : args) spec.argv.push_back(a);
  spec.env = env;
  spec.stdout_path = (dir.path() / "out").string();
  spec.stderr_path = (dir.path() / "err").string();
  ExitStatus st = run_command(
      spec, std::chrono::steady_clock::now() + std::chrono::minutes(5));
  CliResult result;
  result.exit_code = st.signaled ? 128 + st.term_signal : st.exit_code;
  result.out = read_file(dir.path() / "out");
  result.err = read_file(dir.path() / "err");
  return result;
}

std::vector<std::string> spec_args() {
  std::vector<std::string> args;
  for (const auto& entry :
       std::filesystem::directory_iterator(testing::faultmodels_dir())) {
    if (entry.path().extension() != ".fispec") continue;
    args.push_back("--spec");
    args.push_back(entry.path().string());
  }
  return args;
}

class CliPipeline : public ::testing::Test {
 protected:
  CliPipeline() : work_("pipeline") {
    project_ = work_.path() / "project";
    testing::copy_tree(testing::fixtures_dir() / "miniproj", project_);
    plan_path_ = (work_.path() / "plan.json").string();
  }

  std::vector<std::string> with_specs(std::vector<std::string> args) {
    for (const auto& a : spec_args()) args.push_back(a);
    return args;
  }

  testing::TempDir work_;
  std::filesystem::path project_;
  std::string plan_path_;
};

TEST_F(CliPipeline, ScanWritesPlanAndSummary) {
  CliResult result = run_cli(with_specs(
      {"scan", "--project", project_.string(), "--out", plan_path_}));
  ASSERT_EQ(result.exit_code, 0) << result.err;
  InjectionPlan plan = load_plan(plan_path_);
  EXPECT_GT(plan.points.size(), 10u);
  EXPECT_EQ(result.out, "points=" + std::to_string(plan.points.size()) +
                            " files_skipped=0\n");
}

TEST_F(CliPipeline, ScanIsIdempotent) {
  auto first = run_cli(with_specs(
      {"scan", "--project", project_.string(), "--out", plan_path_}));
  std::string plan_a = read_file(plan_path_);
  auto second = run_cli(with_specs(
      {"scan", "--project", project_.string(), "--out", plan_path_}));
  ASSERT_EQ(first.exit_code, 0);
  ASSERT_EQ(second.exit_code, 0);
  EXPECT_EQ(plan_a, read_file(plan_path_));
}

TEST_F(CliPipeline, ScanSampleDeterministic) {
  std::string out_a = (work_.path() / "a.json").string();
  std::string out_b = (work_.path() / "b.json").string();
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", out_a, "--sample", "5", "--seed",
                                "7"}))
                .exit_code,
            0);
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", out_b, "--sample", "5", "--seed",
                                "7"}))
                .exit_code,
            0);
  EXPECT_EQ(read_file(out_a), read_file(out_b));
  EXPECT_EQ(load_plan(out_a).points.size(), 5u);
}

TEST_F(CliPipeline, ScanNonexistentProjectExitsOne) {
  CliResult result = run_cli(with_specs(
      {"scan", "--project", "/nonexistent/dir", "--out", plan_path_}));
  EXPECT_EQ(result.exit_code, 1);
  EXPECT_NE(result.err.find("error:"), std::string::npos);
}

TEST_F(CliPipeline, MutateWritesParseableMinimalDiff) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_}))
                .exit_code,
            0);
  InjectionPlan plan = load_plan(plan_path_);
  const InjectionPoint* mfc_point = nullptr;
  for (const auto& p : plan.points)
    if (p.spec_name == "mfc") mfc_point = &p;
  ASSERT_NE(mfc_point, nullptr);

  auto out_dir = work_.path() / "mutant";
  CliResult result = run_cli(with_specs(
      {"mutate", "--project", project_.string(), "--plan", plan_path_,
       "--point", mfc_point->id, "--out", out_dir.string(), "--mode",
       "plain"}));
  ASSERT_EQ(result.exit_code, 0) << result.err;
  EXPECT_EQ(result.out, "point=" + mfc_point->id + " files=1 mode=plain\n");

  std::string mutated = read_file(out_dir / mfc_point->file);
  EXPECT_NO_THROW(parse_source(mutated, mfc_point->file));
  EXPECT_TRUE(std::filesystem::exists(out_dir / "_faultinj_runtime.py"));

  // Diff confined to the point's line span plus the import line.
  std::string original = read_file(project_ / mfc_point->file);
  auto before = split_lines(original);
  auto after = split_lines(mutated);
  size_t ai = 0, import_lines = 0;
  for (size_t bi = 0; bi < before.size(); ++bi) {
    int line_no = static_cast<int>(bi) + 1;
    if (line_no >= mfc_point->line_start && line_no <= mfc_point->line_end)
      continue;  // changed region
    while (ai < after.size() && after[ai] != before[bi]) {
      if (after[ai] == "import _faultinj_runtime") ++import_lines;
      ++ai;
    }
    ASSERT_LT(ai, after.size()) << "line " << line_no << " lost";
    ++ai;
  }
  EXPECT_EQ(import_lines, 1u);
}

TEST_F(CliPipeline, MutateUnknownPointExitsOne) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_}))
                .exit_code,
            0);
  CliResult result = run_cli(with_specs(
      {"mutate", "--project", project_.string(), "--plan", plan_path_,
       "--point", "doesnotexist", "--out",
       (work_.path() / "m").string()}));
  EXPECT_EQ(result.exit_code, 1);
  EXPECT_NE(result.err.find("unknown point id"), std::string::npos);
}

TEST_F(CliPipeline, StalePlanExitsOne) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_}))
                .exit_code,
            0);
  InjectionPlan plan = load_plan(plan_path_);
  write_file(project_ / "app" / "store.py",
             read_file(project_ / "app" / "store.py") + "\nnew_stmt = 1\n");
  CliResult result = run_cli(with_specs(
      {"mutate", "--project", project_.string(), "--plan", plan_path_,
       "--point", plan.points[0].id, "--out",
       (work_.path() / "m").string()}));
  EXPECT_EQ(result.exit_code, 1);
  EXPECT_NE(result.err.find("plan is stale"), std::string::npos);
}

std::string driver_campaign(const std::filesystem::path& dir) {
  auto path = dir / "campaign.json";
  write_file(path, R"json({
    "workload_commands": [["python3", "driver.py"]],
    "round_mode": "single",
    "experiment_timeout_s": 30,
    "seed": 7,
    "analysis": {
      "failure_modes": [
        {"name": "value-error", "scope": "workload_output",
         "pattern": "ValueError|OSError"}
      ],
      "error_log_pattern": "ERROR"
    }
  })json");
  return path.string();
}

TEST_F(CliPipeline, CoverageRunAnalyzeEndToEnd) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_}))
                .exit_code,
            0);
  std::string campaign = driver_campaign(work_.path());
  std::string reduced = (work_.path() / "reduced.json").string();

  CliResult cov = run_cli(with_specs(
      {"coverage", "--project", project_.string(), "--plan", plan_path_,
       "--campaign", campaign, "--out", reduced}));
  ASSERT_EQ(cov.exit_code, 0) << cov.err;
  InjectionPlan full = load_plan(plan_path_);
  InjectionPlan covered = load_plan(reduced);
  EXPECT_GT(covered.points.size(), 0u);
  EXPECT_LT(covered.points.size(), full.points.size());
  EXPECT_EQ(cov.out, "covered=" + std::to_string(covered.points.size()) +
                         "/" + std::to_string(full.points.size()) + "\n");
  // Uncovered component stays out.
  for (const auto& p : covered.points) EXPECT_NE(p.file, "tools/cleanup.py");

  std::string results = (work_.path() / "results").string();
  CliResult run = run_cli(
      with_specs({"run", "--project", project_.string(), "--plan", reduced,
                  "--campaign", campaign, "--out", results, "--parallel",
                  "2"}),
      {{"FAULTINJ_HOME", work_.path().string()}});
  ASSERT_EQ(run.exit_code, 0) << run.err;
  EXPECT_NE(run.out.find("experiments=" +
                         std::to_string(covered.points.size())),
            std::string::npos);

  // Every covered point has a record directory.
  for (const auto& p : covered.points)
    EXPECT_TRUE(std::filesystem::exists(
        std::filesystem::path(results) / p.id / "record.json"))
        << p.id;

  std::string report = (work_.path() / "report.json").string();
  CliResult an = run_cli({"analyze", "--results", results, "--campaign",
                          campaign, "--out", report, "--drill",
                          "mode=NO_FAILURE"});
  ASSERT_EQ(an.exit_code, 0) << an.err;
  auto doc = nlohmann::json::parse(read_file(report));
  int total = 0;
  for (const auto& [mode, count] : doc["distribution"].items())
    total += count.get<int>();
  EXPECT_EQ(total, static_cast<int>(covered.points.size()));
  // Single-round campaign: availability is undefined, never 0.
  EXPECT_EQ(doc["unavailability_pct"], "UNDEFINED");
  EXPECT_NE(an.out.find("experiments listed:"), std::string::npos);
  EXPECT_NE(an.out.find("classified="), std::string::npos);
}

TEST_F(CliPipeline, RerunYieldsIdenticalClassifications) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_, "--filter",
                                "app/handlers.py"}))
                .exit_code,
            0);
  std::string campaign = driver_campaign(work_.path());
  auto run_once = [&](const std::string& results) {
    CliResult run = run_cli(
        with_specs({"run", "--project", project_.string(), "--plan",
                    plan_path_, "--campaign", campaign, "--out", results}),
        {{"FAULTINJ_HOME", work_.path().string()}});
    EXPECT_EQ(run.exit_code, 0) << run.err;
    std::string report = results + "-report.json";
    CliResult an = run_cli({"analyze", "--results", results, "--campaign",
                            campaign, "--out", report});
    EXPECT_EQ(an.exit_code, 0) << an.err;
    return nlohmann::json::parse(read_file(report));
  };
  auto a = run_once((work_.path() / "r1").string());
  auto b = run_once((work_.path() / "r2").string());
  EXPECT_EQ(a["distribution"], b["distribution"]);
  EXPECT_EQ(a["per_spec"], b["per_spec"]);
}

TEST_F(CliPipeline, BaselineFailureExitsTwo) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_}))
                .exit_code,
            0);
  auto campaign = work_.path() / "bad.json";
  write_file(campaign, R"json({
    "workload_commands": [["python3", "-c", "import sys; sys.exit(5)"]],
    "round_mode": "single",
    "experiment_timeout_s": 10
  })json");
  CliResult result = run_cli(with_specs(
      {"coverage", "--project", project_.string(), "--plan", plan_path_,
       "--campaign", campaign.string(), "--out",
       (work_.path() / "red.json").string()}));
  EXPECT_EQ(result.exit_code, 2);
  EXPECT_NE(result.err.find("baseline"), std::string::npos);
}

TEST_F(CliPipeline, AllInvalidExperimentsExitTwo) {
  ASSERT_EQ(run_cli(with_specs({"scan", "--project", project_.string(),
                                "--out", plan_path_, "--filter",
                                "app/handlers.py"}))
                .exit_code,
            0);
  auto campaign = work_.path() / "inv.json";
  write_file(campaign, R"json({
    "setup_commands": [["python3", "-c", "import sys; sys.exit(1)"]],
    "workload_commands": [["python3", "driver.py"]],
    "round_mode": "single",
    "experiment_timeout_s": 10
  })json");
  CliResult result = run_cli(
      with_specs({"run", "--project", project_.string(), "--plan",
                  plan_path_, "--campaign", campaign.string(), "--out",
                  (work_.path() / "res").string()}),
      {{"FAULTINJ_HOME", work_.path().string()}});
  EXPECT_EQ(result.exit_code, 2) << result.err << result.out;
  EXPECT_NE(result.out.find("invalid="), std::string::npos);
}

TEST_F(CliPipeline, ScanWithFaultModelFileAndComponents) {
  // Fault model with embedded spec texts plus a component map.
  nlohmann::ordered_json model;
  model["format_version"] = 1;
  model["specs"] = nlohmann::ordered_json::array();
  model["specs"].push_back(
      {{"name", "mfc"},
       {"text", read_file(testing::faultmodels_dir() / "mfc.fispec")}});
  auto model_path = work_.path() / "model.json";
  write_file(model_path, model.dump(2));
  auto components_path = work_.path() / "components.json";
  write_file(components_path,
             R"json({"app/": "core", "tools/": "maintenance"})json");

  CliResult result = run_cli({"scan", "--project", project_.string(),
                              "--model", model_path.string(), "--out",
                              plan_path_, "--components",
                              components_path.string(), "--component",
                              "maintenance"});
  ASSERT_EQ(result.exit_code, 0) << result.err;
  InjectionPlan plan = load_plan(plan_path_);
  ASSERT_FALSE(plan.points.empty());
  for (const auto& p : plan.points) {
    EXPECT_EQ(p.spec_name, "mfc");
    EXPECT_EQ(p.component, "maintenance");
    EXPECT_EQ(p.file.rfind("tools/", 0), 0u);
  }
}

TEST(CliUsage, UnknownFlagExitsOne) {
  CliResult result = run_cli({"scan", "--bogus"});
  EXPECT_EQ(result.exit_code, 1);
}

TEST(CliUsage, MissingSubcommandExitsOne) {
  CliResult result = run_cli({});
  EXPECT_EQ(result.exit_code, 1);
}

}  // namespace
}  // namespace faultinj
