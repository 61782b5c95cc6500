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

#include "faultinj/mutator.hpp"

#include <gtest/gtest.h>

#include "support/test_util.hpp"

namespace faultinj {
namespace {

MetaModel model_from(const std::string& text, const std::string& name) {
  return compile_spec(parse_spec(text, name));
}

MetaModel mfc() {
  return model_from(
      "change { $BLOCK{tag=b1} $CALL{name=delete_*}(...) $BLOCK{tag=b2} } "
      "into { $BLOCK{tag=b1} $BLOCK{tag=b2} }",
      "mfc");
}

std::vector<MetaModel> shipped_models() {
  std::vector<MetaModel> models;
  for (const auto& entry :
       std::filesystem::directory_iterator(testing::faultmodels_dir())) {
    if (entry.path().extension() != ".fispec") continue;
    models.push_back(model_from(read_file(entry.path()),
                                entry.path().stem().string()));
  }
  return models;
}

Match only_match(const ProgramTree& tree, const MetaModel& model) {
  auto matches = find_matches(tree, model);
  EXPECT_EQ(matches.size(), 1u);
  return matches.front();
}

TEST(ApplyReplacement, MfcKeepsBlocksDropsCall) {
  ProgramTree tree = parse_source("x=1\ndelete_port(p)\ny=2\n", "t.py");
  MetaModel model = mfc();
  Match m = only_match(tree, model);
  auto stmts = apply_replacement(tree, m, model, 0);
  ASSERT_EQ(stmts.size(), 2u);
  EXPECT_EQ(stmts[0], "x=1");
  EXPECT_EQ(stmts[1], "y=2");
}

TEST(ApplyReplacement, IdentityTemplateIsVerbatim) {
  MetaModel model = model_from(
      "change { $BLOCK#b1 $CALL{name=delete_*}#c(...) $BLOCK#b2 } into { "
      "$BLOCK#b1 $CALL#c $BLOCK#b2 }",
      "identity");
  ProgramTree tree =
      parse_source("x = 1\ndelete_port(p)\ny = 2\n", "t.py");
  Match m = only_match(tree, model);
  auto stmts = apply_replacement(tree, m, model, 0);
  ASSERT_EQ(stmts.size(), 3u);
  EXPECT_EQ(stmts[0], "x = 1");
  EXPECT_EQ(stmts[1], "delete_port(p)");
  EXPECT_EQ(stmts[2], "y = 2");
}

TEST(ApplyReplacement, WpfCorruptWrapsBoundString) {
  MetaModel model = model_from(
      "change { $CALL{name=utils.execute}#c($STRING{contains=-}#s) } into { "
      "$CALL#c($CORRUPT(#s)) }",
      "wpf");
  ProgramTree tree = parse_source("utils.execute(\"-f\", v)\n", "t.py");
  Match m = only_match(tree, model);
  auto stmts = apply_replacement(tree, m, model, 1234);
  ASSERT_EQ(stmts.size(), 1u);
  EXPECT_EQ(stmts[0],
            "utils.execute(_faultinj_runtime.fi_corrupt(\"-f\", 1234), v)");
}

TEST(ApplyReplacement, CorruptSeedAttributeWinsOverExperimentSeed) {
  MetaModel model = model_from(
      "change { $CALL{name=utils.execute}#c($STRING{contains=-}#s) } into { "
      "$CALL#c($CORRUPT{seed=9}(#s)) }",
      "wpf-seeded");
  ProgramTree tree = parse_source("utils.execute(\"-f\")\n", "t.py");
  Match m = only_match(tree, model);
  auto stmts = apply_replacement(tree, m, model, 1234);
  ASSERT_EQ(stmts.size(), 1u);
  EXPECT_EQ(stmts[0],
            "utils.execute(_faultinj_runtime.fi_corrupt(\"-f\", 9))");
}

TEST(ApplyReplacement, HogAndTimeoutExpandToHelperCalls) {
  MetaModel model = model_from(
      "change { $CALL{name=*.put}#c(...) } into { $TIMEOUT{ms=50} $CALL#c "
      "$HOG{resource=cpu, threads=3} }",
      "slowdown");
  ProgramTree tree = parse_source("store.put(k, v)\n", "t.py");
  Match m = only_match(tree, model);
  auto stmts = apply_replacement(tree, m, model, 0);
  ASSERT_EQ(stmts.size(), 3u);
  EXPECT_EQ(stmts[0], "_faultinj_runtime.fi_sleep(50)");
  EXPECT_EQ(stmts[1], "store.put(k, v)");
  EXPECT_EQ(stmts[2], "_faultinj_runtime.fi_hog(3)");
}

TEST(ApplyReplacement, EmptyTemplateYieldsEmptyList) {
  MetaModel model = model_from(
      "change { if $EXPR#cond : { $BLOCK{tag=body, max=4} continue } } "
      "into { }",
      "mifs");
  ProgramTree tree = parse_source(
      "for k in ks:\n    if k is None:\n        log(k)\n        continue\n"
      "    use(k)\n",
      "t.py");
  Match m = only_match(tree, model);
  EXPECT_TRUE(apply_replacement(tree, m, model, 0).empty());
}

// --- generate_mutant -------------------------------------------------------

std::vector<std::string> line_diff(const std::string& before,
                                   const std::string& after) {
  // Lines present in exactly one side, order-insensitive multiset diff.
  auto a = split_lines(before);
  auto b = split_lines(after);
  std::multiset<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::vector<std::string> out;
  for (const auto& line : sa)
    if (sb.count(line) < sa.count(line) && sb.erase(line) == 0)
      out.push_back("- " + line);
  for (const auto& line : sb)
    if (sa.count(line) == 0) out.push_back("+ " + line);
  return out;
}

TEST(GenerateMutant, PlainMfcRemovesExactlyTheCallLine) {
  ProgramTree tree =
      parse_source("x = 1\ndelete_port(p)\ny = 2\n", "t.py");
  MetaModel model = mfc();
  Match m = only_match(tree, model);
  MutantSource mutant = generate_mutant(tree, m, model, MutantMode::kPlain,
                                        TriggerChannel{}, 0);
  ASSERT_EQ(mutant.files.size(), 1u);
  const std::string& text = mutant.files.at("t.py");
  auto diff = line_diff(std::string(tree.source()), text);
  ASSERT_EQ(diff.size(), 2u) << text;
  EXPECT_EQ(diff[0], "- delete_port(p)");
  EXPECT_EQ(diff[1], "+ import _faultinj_runtime");
}

TEST(GenerateMutant, ImportGoesAfterDocstringAndFutureImports) {
  ProgramTree tree = parse_source(
      "\"\"\"Doc.\"\"\"\nfrom __future__ import annotations\nx = 1\n"
      "delete_port(p)\ny = 2\n",
      "t.py");
  MetaModel model = mfc();
  Match m = only_match(tree, model);
  MutantSource mutant = generate_mutant(tree, m, model, MutantMode::kPlain,
                                        TriggerChannel{}, 0);
  auto lines = split_lines(mutant.files.at("t.py"));
  ASSERT_GE(lines.size(), 3u);
  EXPECT_EQ(lines[0], "\"\"\"Doc.\"\"\"");
  EXPECT_EQ(lines[1], "from __future__ import annotations");
  EXPECT_EQ(lines[2], "import _faultinj_runtime");
}

TEST(GenerateMutant, TriggeredKeepsOriginalInElseBranch) {
  ProgramTree tree =
      parse_source("x = 1\ndelete_port(p)\ny = 2\n", "t.py");
  MetaModel model = mfc();
  Match m = only_match(tree, model);
  MutantSource mutant = generate_mutant(tree, m, model,
                                        MutantMode::kTriggered,
                                        TriggerChannel{}, 0);
  const std::string& text = mutant.files.at("t.py");
  EXPECT_NE(text.find("if _faultinj_runtime.fi_enabled("), std::string::npos);
  EXPECT_NE(text.find("else:"), std::string::npos);
  EXPECT_NE(text.find("    delete_port(p)"), std::string::npos);
  EXPECT_NO_THROW(parse_source(text, "t.py"));
}

TEST(GenerateMutant, WholeBlockDeletionInsertsPass) {
  MetaModel model = model_from(
      "change { if $EXPR#c : { $BLOCK#b continue } } into { }", "mifs-min");
  ProgramTree tree = parse_source(
      "def f(ks):\n    if ks is None:\n        log(ks)\n        continue\n",
      "t.py");
  Match m = only_match(tree, model);
  MutantSource mutant = generate_mutant(tree, m, model, MutantMode::kPlain,
                                        TriggerChannel{}, 0);
  const std::string& text = mutant.files.at("t.py");
  EXPECT_NE(text.find("    pass"), std::string::npos);
  EXPECT_NO_THROW(parse_source(text, "t.py"));
}

TEST(GenerateMutant, InlineSuiteWindowStaysParseable) {
  MetaModel model = model_from(
      "change { $CALL{name=audit_log}#c(...) } into { $TIMEOUT{ms=5} "
      "$CALL#c }",
      "delay");
  ProgramTree tree = parse_source(
      "def stop(store):\n"
      "    if store is None: audit_log(\"noop\", \"stop\"); return False\n"
      "    return True\n",
      "t.py");
  Match m = only_match(tree, model);
  for (MutantMode mode : {MutantMode::kPlain, MutantMode::kTriggered}) {
    MutantSource mutant =
        generate_mutant(tree, m, model, mode, TriggerChannel{}, 0);
    EXPECT_NO_THROW(parse_source(mutant.files.at("t.py"), "t.py"))
        << mutant.files.at("t.py");
  }
}

TEST(GenerateMutant, SemicolonWindowStaysParseable) {
  ProgramTree tree = parse_source("x = 1; delete_port(p); y = 2\n", "t.py");
  MetaModel model = mfc();
  Match m = only_match(tree, model);
  for (MutantMode mode : {MutantMode::kPlain, MutantMode::kTriggered}) {
    MutantSource mutant =
        generate_mutant(tree, m, model, mode, TriggerChannel{}, 0);
    EXPECT_NO_THROW(parse_source(mutant.files.at("t.py"), "t.py"))
        << mutant.files.at("t.py");
  }
}

TEST(GenerateMutant, AllCorpusMutantsReparse) {
  auto models = shipped_models();
  int generated = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(
           testing::fixtures_dir() / "miniproj")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".py")
      continue;
    std::string rel = entry.path().lexically_relative(
        testing::fixtures_dir() / "miniproj").generic_string();
    ProgramTree tree = parse_source(read_file(entry.path()), rel);
    for (const MetaModel& model : models) {
      for (const Match& m : find_matches(tree, model)) {
        for (MutantMode mode : {MutantMode::kPlain, MutantMode::kTriggered}) {
          MutantSource mutant =
              generate_mutant(tree, m, model, mode, TriggerChannel{}, 7);
          EXPECT_NO_THROW(parse_source(mutant.files.at(rel), rel));
          ++generated;
        }
      }
    }
  }
  EXPECT_GT(generated, 30);
}

TEST(GenerateMutant, UnmodifiedLinesByteIdenticalExceptImport) {
  auto models = shipped_models();
  for (const auto& entry : std::filesystem::recursive_directory_iterator(
           testing::fixtures_dir() / "miniproj")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".py")
      continue;
    std::string rel = entry.path().lexically_relative(
        testing::fixtures_dir() / "miniproj").generic_string();
    std::string source = read_file(entry.path());
    ProgramTree tree = parse_source(source, rel);
    for (const MetaModel& model : models) {
      for (const Match& m : find_matches(tree, model)) {
        MutantSource mutant = generate_mutant(
            tree, m, model, MutantMode::kPlain, TriggerChannel{}, 7);
        auto before = split_lines(source);
        auto after = split_lines(mutant.files.at(rel));
        // Outside [line_start, line_end] and the import line, lines are
        // unchanged and in order.
        int line_start = m.line_start(), line_end = m.line_end();
        size_t ai = 0;
        for (size_t bi = 0; bi < before.size(); ++bi) {
          int line_no = static_cast<int>(bi) + 1;
          if (line_no >= line_start && line_no <= line_end) continue;
          while (ai < after.size() &&
                 (after[ai] == "import _faultinj_runtime" ||
                  (line_no > line_start &&
                   after[ai] != before[bi])))
            ++ai;
          ASSERT_LT(ai, after.size()) << rel << " line " << line_no;
          EXPECT_EQ(after[ai], before[bi]) << rel << " line " << line_no;
          ++ai;
        }
      }
    }
  }
}

// --- runtime helper ---------------------------------------------------------

class HelperFixture : public ::testing::Test {
 protected:
  void run_helper(const std::string& body,
                  const std::map<std::string, std::string>& env,
                  std::string* out, int* code) {
    testing::TempDir dir("helper");
    TriggerChannel trigger;
    trigger.control_path = (dir.path() / "trigger.flag").string();
    write_file(dir.path() / kHelperModuleName, emit_runtime_helper(trigger));
    auto env2 = env;
    env2["PYTHONPATH"] = dir.path().string();
    if (env.count("WRITE_TRIGGER"))
      write_file(dir.path() / "trigger.flag", env.at("WRITE_TRIGGER"));
    *out = testing::run_python("import _faultinj_runtime as fi\n" + body,
                               env2, code);
  }
};

TEST_F(HelperFixture, EnabledCheckReadsControlFile) {
  std::string out;
  int code = 0;
  run_helper("print(fi.fi_enabled())", {{"WRITE_TRIGGER", "1"}}, &out, &code);
  EXPECT_EQ(out, "True\n");
  run_helper("print(fi.fi_enabled())", {{"WRITE_TRIGGER", "0"}}, &out, &code);
  EXPECT_EQ(out, "False\n");
  run_helper("print(fi.fi_enabled())", {}, &out, &code);
  EXPECT_EQ(out, "False\n");
}

TEST_F(HelperFixture, CorruptIsDeterministicPerSeed) {
  std::string a, b, c;
  int code = 0;
  run_helper("print(repr(fi.fi_corrupt('-f', 1)))", {}, &a, &code);
  run_helper("print(repr(fi.fi_corrupt('-f', 1)))", {}, &b, &code);
  run_helper("print(repr(fi.fi_corrupt('-f', 99)))", {}, &c, &code);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  // Golden value pinned from the first run of this implementation.
  EXPECT_EQ(a, "')`'\n");
}

TEST_F(HelperFixture, CorruptIntegerNegates) {
  std::string out;
  int code = 0;
  run_helper("print(fi.fi_corrupt(5, 0, 'negate'))", {}, &out, &code);
  EXPECT_EQ(out, "-6\n");
  run_helper("print(fi.fi_corrupt(5, 0))", {}, &out, &code);
  EXPECT_EQ(out, "-6\n");
}

TEST_F(HelperFixture, CorruptModeNoneReturnsNone) {
  std::string out;
  int code = 0;
  run_helper("print(fi.fi_corrupt('abc', 0, 'none'))", {}, &out, &code);
  EXPECT_EQ(out, "None\n");
}

TEST_F(HelperFixture, CorruptSeedFallsBackToEnvironment) {
  std::string a, b;
  int code = 0;
  run_helper("print(repr(fi.fi_corrupt('xyz')))", {{"FAULTINJ_SEED", "4"}},
             &a, &code);
  run_helper("print(repr(fi.fi_corrupt('xyz', 4)))", {}, &b, &code);
  EXPECT_EQ(a, b);
}

TEST_F(HelperFixture, SpecNamedAliasesExist) {
  std::string out;
  int code = 0;
  run_helper(
      "print(fi.__fi_corrupt(5, 0), fi.__fi_sleep(0), "
      "callable(fi.__fi_hog), callable(fi.__fi_enabled))",
      {}, &out, &code);
  EXPECT_EQ(out, "-6 None True True\n");
}

TEST_F(HelperFixture, HelperWorksFromInsideClassMethods) {
  // Double-underscore helper references would be name-mangled in class
  // bodies; the emitted call sites must survive there.
  std::string out;
  int code = 0;
  run_helper(
      "class A:\n"
      "    def m(self):\n"
      "        return _faultinj_runtime.fi_corrupt(5, 0)\n"
      "import _faultinj_runtime\n"
      "print(A().m())",
      {}, &out, &code);
  EXPECT_EQ(out, "-6\n");
}

// --- trigger-off equivalence and activation ---------------------------------

struct MutantRun {
  std::string stdout_text;
  int exit_code = 0;
};

MutantRun run_driver_with_mutant(const MutantSource* mutant,
                                 const std::string& trigger_value) {
  testing::TempDir dir("mutrun");
  auto project = dir.path() / "project";
  testing::copy_tree(testing::fixtures_dir() / "miniproj", project);
  TriggerChannel trigger;
  trigger.control_path = (dir.path() / "trigger.flag").string();
  if (mutant != nullptr) {
    for (const auto& [rel, text] : mutant->files)
      write_file(project / rel, text);
    write_file(project / kHelperModuleName, emit_runtime_helper(trigger));
  }
  write_file(dir.path() / "trigger.flag", trigger_value);

  SpawnSpec spec;
  spec.argv = {"python3", "driver.py"};
  spec.cwd = project.string();
  spec.env = {{"PYTHONPATH", project.string()},
              {"FAULTINJ_TRIGGER_FILE", trigger.control_path}};
  spec.stdout_path = (dir.path() / "out").string();
  spec.stderr_path = (dir.path() / "err").string();
  ExitStatus st = run_command(
      spec, std::chrono::steady_clock::now() + std::chrono::seconds(30));
  MutantRun run;
  run.stdout_text = read_file(dir.path() / "out");
  run.exit_code = st.signaled ? 128 + st.term_signal : st.exit_code;
  return run;
}

TEST(TriggeredMutants, TriggerOffMatchesBaselineOnWholeCorpus) {
  MutantRun baseline = run_driver_with_mutant(nullptr, "0");
  ASSERT_EQ(baseline.exit_code, 0);

  auto models = shipped_models();
  int checked = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(
           testing::fixtures_dir() / "miniproj")) {
    if (!entry.is_regular_file() || entry.path().extension() != ".py")
      continue;
    std::string rel = entry.path().lexically_relative(
        testing::fixtures_dir() / "miniproj").generic_string();
    ProgramTree tree = parse_source(read_file(entry.path()), rel);
    for (const MetaModel& model : models) {
      for (const Match& m : find_matches(tree, model)) {
        MutantSource mutant = generate_mutant(
            tree, m, model, MutantMode::kTriggered, TriggerChannel{}, 7);
        MutantRun off = run_driver_with_mutant(&mutant, "0");
        EXPECT_EQ(off.stdout_text, baseline.stdout_text)
            << model.spec_name << " at " << rel << ":" << m.line_start();
        EXPECT_EQ(off.exit_code, baseline.exit_code);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 15);
}

TEST(TriggeredMutants, EnabledMifsSkipsGuardedBody) {
  MetaModel model = model_from(
      "change { if $EXPR#cond : { $BLOCK{tag=body, max=4} continue } } "
      "into { }",
      "mifs");
  std::string rel = "app/store.py";
  ProgramTree tree = parse_source(
      read_file(testing::fixtures_dir() / "miniproj" / rel), rel);
  auto matches = find_matches(tree, model);
  ASSERT_FALSE(matches.empty());
  // The purge() guard prints "audit skip missing" in the baseline; with
  // the fault enabled the guarded continue is gone.
  const Match* purge_match = nullptr;
  for (const Match& m : matches)
    if (render_tokens(m.bindings.at("cond").tok_begin,
                      m.bindings.at("cond").tok_end)
            .find("not in") != std::string::npos)
      purge_match = &m;
  ASSERT_NE(purge_match, nullptr);
  MutantSource mutant = generate_mutant(tree, *purge_match, model,
                                        MutantMode::kTriggered,
                                        TriggerChannel{}, 7);
  MutantRun off = run_driver_with_mutant(&mutant, "0");
  MutantRun on = run_driver_with_mutant(&mutant, "1");
  EXPECT_NE(off.stdout_text.find("audit skip missing"), std::string::npos);
  EXPECT_EQ(on.stdout_text.find("audit skip missing"), std::string::npos);
}

TEST(TriggeredMutants, PlainEqualsTriggeredWithTriggerOn) {
  auto models = shipped_models();
  const MetaModel* mfc_model = nullptr;
  for (const auto& m : models)
    if (m.spec_name == "mfc") mfc_model = &m;
  ASSERT_NE(mfc_model, nullptr);
  std::string rel = "app/handlers.py";
  ProgramTree tree = parse_source(
      read_file(testing::fixtures_dir() / "miniproj" / rel), rel);
  auto matches = find_matches(tree, *mfc_model);
  ASSERT_FALSE(matches.empty());
  MutantSource plain = generate_mutant(tree, matches[0], *mfc_model,
                                       MutantMode::kPlain, TriggerChannel{},
                                       7);
  MutantSource triggered = generate_mutant(tree, matches[0], *mfc_model,
                                           MutantMode::kTriggered,
                                           TriggerChannel{}, 7);
  MutantRun plain_run = run_driver_with_mutant(&plain, "0");
  MutantRun on_run = run_driver_with_mutant(&triggered, "1");
  EXPECT_EQ(plain_run.stdout_text, on_run.stdout_text);
  EXPECT_EQ(plain_run.exit_code, on_run.exit_code);
}

// --- coverage instrumentation ------------------------------------------------

TEST(InstrumentCoverage, MarkersFollowExecution) {
  auto models = shipped_models();
  std::map<std::string, ProgramTree> trees;
  std::vector<const ProgramTree*> tree_ptrs;
  ScanResult scan = scan_project(testing::fixtures_dir() / "miniproj", models,
                                 ComponentMap{});
  InjectionPlan plan = build_plan(scan, Selection{});
  for (const auto& p : plan.points) {
    if (trees.count(p.file)) continue;
    trees.emplace(p.file,
                  parse_source(read_file(testing::fixtures_dir() /
                                         "miniproj" / p.file),
                               p.file));
  }
  for (auto& [path, tree] : trees) tree_ptrs.push_back(&tree);
  TriggerChannel trigger;
  MutantSource build = instrument_coverage(tree_ptrs, models, plan, trigger);
  for (const auto& [rel, text] : build.files)
    EXPECT_NO_THROW(parse_source(text, rel)) << rel;

  // Run the instrumented driver and collect coverage ids.
  testing::TempDir dir("cov");
  auto project = dir.path() / "project";
  testing::copy_tree(testing::fixtures_dir() / "miniproj", project);
  for (const auto& [rel, text] : build.files) write_file(project / rel, text);
  write_file(project / kHelperModuleName, build.helper_module);
  auto cov_file = dir.path() / "coverage.log";
  SpawnSpec spec;
  spec.argv = {"python3", "driver.py"};
  spec.cwd = project.string();
  spec.env = {{"PYTHONPATH", project.string()},
              {"FAULTINJ_COVERAGE_FILE", cov_file.string()}};
  spec.stdout_path = (dir.path() / "out").string();
  spec.stderr_path = (dir.path() / "err").string();
  ExitStatus st = run_command(
      spec, std::chrono::steady_clock::now() + std::chrono::seconds(30));
  ASSERT_TRUE(st.ok()) << read_file(dir.path() / "err");

  std::set<std::string> covered;
  for (const std::string& line : split_lines(read_file(cov_file)))
    if (line.rfind("FAULTINJ-COV ", 0) == 0) covered.insert(line.substr(13));

  // Instrumented driver output must equal the baseline (semantics
  // unchanged).
  MutantRun baseline = run_driver_with_mutant(nullptr, "0");
  EXPECT_EQ(read_file(dir.path() / "out"), baseline.stdout_text);

  // Points in tools/cleanup.py are never executed by the driver.
  std::set<std::string> plan_ids;
  bool cleanup_uncovered = true;
  bool some_covered = false;
  for (const auto& p : plan.points) {
    plan_ids.insert(p.id);
    if (p.file == "tools/cleanup.py" && covered.count(p.id))
      cleanup_uncovered = false;
    if (covered.count(p.id)) some_covered = true;
  }
  EXPECT_TRUE(cleanup_uncovered);
  EXPECT_TRUE(some_covered);
  for (const auto& id : covered) EXPECT_TRUE(plan_ids.count(id)) << id;
  EXPECT_LT(covered.size(), plan_ids.size());
}

TEST(InstrumentCoverage, SameStatementProbesKeepPlanOrder) {
  // Two specs anchored at the same statement: both probes are emitted,
  // in plan order.
  MetaModel raise_model = model_from(
      "change { $CALL{name=ping}#c(...) } into { raise OSError(\"x\") }",
      "a-raise");
  MetaModel delay_model = model_from(
      "change { $CALL{name=ping}#c(...) } into { $TIMEOUT{ms=1} $CALL#c }",
      "b-delay");
  ProgramTree tree = parse_source("x = 1\nping(x)\n", "t.py");
  InjectionPlan plan;
  for (const MetaModel* model : {&raise_model, &delay_model}) {
    auto matches = find_matches(tree, *model);
    ASSERT_EQ(matches.size(), 1u);
    InjectionPoint p;
    p.id = point_id("t.py", matches[0].block_index, matches[0].first,
                    matches[0].last, model->spec_name);
    p.file = "t.py";
    p.line_start = matches[0].line_start();
    p.line_end = matches[0].line_end();
    p.spec_name = model->spec_name;
    plan.points.push_back(p);
  }
  MutantSource build = instrument_coverage(
      {&tree}, {raise_model, delay_model}, plan, TriggerChannel{});
  const std::string& text = build.files.at("t.py");
  size_t first = text.find("fi_cov(\"" + plan.points[0].id + "\")");
  size_t second = text.find("fi_cov(\"" + plan.points[1].id + "\")");
  ASSERT_NE(first, std::string::npos);
  ASSERT_NE(second, std::string::npos);
  EXPECT_LT(first, second);
  EXPECT_NO_THROW(parse_source(text, "t.py"));
}

TEST(InstrumentCoverage, EmptyPlanTouchesNothing) {
  InjectionPlan plan;
  MutantSource build = instrument_coverage({}, {}, plan, TriggerChannel{});
  EXPECT_TRUE(build.files.empty());
}

}  // namespace
}  // namespace faultinj
