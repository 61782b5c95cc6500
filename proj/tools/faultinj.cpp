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
//
// faultinj: scan -> mutate -> coverage -> run -> analyze.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 campaign-level
// failure (fault-free baseline fails, or every experiment is INVALID).

#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "faultinj/analysis.hpp"
#include "faultinj/dsl.hpp"
#include "faultinj/executor.hpp"
#include "faultinj/mutator.hpp"
#include "faultinj/scanner.hpp"

namespace {

using namespace faultinj;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCampaign = 2;

struct SpecInputs {
  std::vector<std::string> spec_files;
  std::string model_file;
};

void add_spec_options(CLI::App* cmd, SpecInputs& inputs) {
  cmd->add_option("--spec", inputs.spec_files,
                  "bug specification file (.fispec), one spec per file");
  cmd->add_option("--model", inputs.model_file,
                  "fault model JSON with embedded spec texts");
}

std::vector<MetaModel> load_models(const SpecInputs& inputs) {
  std::vector<BugSpec> specs;
  for (const std::string& file : inputs.spec_files) {
    std::filesystem::path path(file);
    specs.push_back(parse_spec(read_file(path), path.stem().string()));
  }
  if (!inputs.model_file.empty()) {
    FaultModelFile model = load_fault_model(inputs.model_file);
    for (BugSpec& spec : model.specs) specs.push_back(std::move(spec));
  }
  if (specs.empty())
    throw std::runtime_error("no specs given; use --spec and/or --model");

  std::vector<MetaModel> models;
  for (const BugSpec& spec : specs) {
    std::vector<Diagnostic> diags = validate_spec(spec);
    if (!diags.empty())
      throw std::runtime_error("spec '" + spec.name +
                               "': " + diags.front().message);
    models.push_back(compile_spec(spec));
  }
  return models;
}

ComponentMap load_component_map(const std::string& file) {
  ComponentMap map;
  if (file.empty()) return map;
  nlohmann::json doc = nlohmann::json::parse(read_file(file));
  for (auto& [prefix, name] : doc.items())
    map.prefixes.emplace_back(prefix, name.get<std::string>());
  return map;
}

void check_fingerprint(const InjectionPlan& plan,
                       const std::filesystem::path& project) {
  if (plan.project_fingerprint != project_fingerprint(project))
    throw std::runtime_error(
        "plan is stale: project content changed since the scan");
}

std::map<std::string, ProgramTree> parse_plan_files(
    const InjectionPlan& plan, const std::filesystem::path& project) {
  std::map<std::string, ProgramTree> trees;
  for (const InjectionPoint& point : plan.points) {
    if (trees.count(point.file) > 0) continue;
    trees.emplace(point.file,
                  parse_source(read_file(project / point.file), point.file));
  }
  return trees;
}

const MetaModel& model_for(const std::vector<MetaModel>& models,
                           const std::string& spec_name) {
  for (const MetaModel& m : models)
    if (m.spec_name == spec_name) return m;
  throw std::runtime_error("no spec loaded for '" + spec_name +
                           "'; pass the same --spec/--model set used for the "
                           "scan");
}

// One TRIGGERED mutant per plan point, seeded per experiment.
std::vector<MutantSource> build_mutants(
    const InjectionPlan& plan, const std::map<std::string, ProgramTree>& trees,
    const std::vector<MetaModel>& models, uint64_t campaign_seed) {
  std::vector<MutantSource> mutants;
  TriggerChannel trigger;  // control path travels via environment
  for (const InjectionPoint& point : plan.points) {
    const ProgramTree& tree = trees.at(point.file);
    const MetaModel& model = model_for(models, point.spec_name);
    std::optional<Match> match = recover_match(tree, model, point);
    if (!match)
      throw std::runtime_error("plan is stale: point " + point.id +
                               " no longer matches " + point.file);
    uint64_t seed = fnv1a64_mix(campaign_seed, point.id);
    mutants.push_back(generate_mutant(tree, *match, model,
                                      MutantMode::kTriggered, trigger, seed));
  }
  return mutants;
}

int cmd_scan(const std::string& project, const SpecInputs& inputs,
             const std::string& out, const std::string& filter,
             const std::string& component, long sample_n, uint64_t seed,
             const std::string& components_file, int workers) {
  std::vector<MetaModel> models = load_models(inputs);
  ComponentMap components = load_component_map(components_file);
  ScanResult scan = scan_project(project, models, components, workers);
  for (const SkipRecord& skip : scan.skipped)
    std::cerr << "warning: skipped " << skip.file << ": " << skip.error
              << "\n";

  Selection selection;
  if (!filter.empty()) {
    selection.mode = Selection::Mode::kFileGlob;
    selection.argument = filter;
  } else if (!component.empty()) {
    selection.mode = Selection::Mode::kComponent;
    selection.argument = component;
  } else if (sample_n >= 0) {
    selection.mode = Selection::Mode::kSample;
    selection.sample_n = static_cast<size_t>(sample_n);
    selection.seed = seed;
  }
  InjectionPlan plan = build_plan(scan, selection);
  save_plan(plan, out);
  std::cout << "points=" << plan.points.size()
            << " files_skipped=" << scan.skipped.size() << "\n";
  return kExitOk;
}

int cmd_mutate(const std::string& project, const SpecInputs& inputs,
               const std::string& plan_file, const std::string& point_id,
               const std::string& out, const std::string& mode_name,
               uint64_t seed) {
  InjectionPlan plan = load_plan(plan_file);
  check_fingerprint(plan, project);
  const InjectionPoint* point = nullptr;
  for (const InjectionPoint& p : plan.points)
    if (p.id == point_id) point = &p;
  if (point == nullptr)
    throw std::runtime_error("unknown point id: " + point_id);

  std::vector<MetaModel> models = load_models(inputs);
  const MetaModel& model = model_for(models, point->spec_name);
  ProgramTree tree =
      parse_source(read_file(std::filesystem::path(project) / point->file),
                   point->file);
  std::optional<Match> match = recover_match(tree, model, *point);
  if (!match)
    throw std::runtime_error("plan is stale: point " + point_id +
                             " no longer matches " + point->file);
  MutantMode mode =
      mode_name == "plain" ? MutantMode::kPlain : MutantMode::kTriggered;
  TriggerChannel trigger;
  MutantSource mutant = generate_mutant(tree, *match, model, mode, trigger,
                                        fnv1a64_mix(seed, point->id));
  write_mutant(mutant, out);
  std::cout << "point=" << point_id << " files=" << mutant.files.size()
            << " mode=" << mode_name << "\n";
  return kExitOk;
}

int cmd_coverage(const std::string& project, const SpecInputs& inputs,
                 const std::string& plan_file, const std::string& campaign,
                 const std::string& out) {
  InjectionPlan plan = load_plan(plan_file);
  check_fingerprint(plan, project);
  std::vector<MetaModel> models = load_models(inputs);
  CampaignConfig cfg = load_campaign_config(campaign);

  std::map<std::string, ProgramTree> trees = parse_plan_files(plan, project);
  std::vector<const ProgramTree*> tree_ptrs;
  for (auto& [path, tree] : trees) tree_ptrs.push_back(&tree);
  TriggerChannel trigger;
  MutantSource build = instrument_coverage(tree_ptrs, models, plan, trigger);

  std::filesystem::path results =
      std::filesystem::path(out).parent_path() / "coverage-baseline";
  Executor executor(project, cfg, results);
  std::set<std::string> covered;
  try {
    covered = executor.run_fault_free(build);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCampaign;
  }
  InjectionPlan reduced = reduce_plan(plan, covered);
  save_plan(reduced, out);
  std::cout << "covered=" << reduced.points.size() << "/"
            << plan.points.size() << "\n";
  return kExitOk;
}

int cmd_run(const std::string& project, const SpecInputs& inputs,
            const std::string& plan_file, const std::string& campaign,
            const std::string& out, int parallel) {
  InjectionPlan plan = load_plan(plan_file);
  check_fingerprint(plan, project);
  std::vector<MetaModel> models = load_models(inputs);
  CampaignConfig cfg = load_campaign_config(campaign);

  std::map<std::string, ProgramTree> trees = parse_plan_files(plan, project);
  std::vector<MutantSource> mutants =
      build_mutants(plan, trees, models, cfg.seed);

  Executor executor(project, cfg, out);
  std::vector<ExperimentRecord> records =
      executor.run_campaign(plan, mutants, parallel);
  save_plan(plan, std::filesystem::path(out) / "plan.json");

  size_t invalid = 0, timeouts = 0;
  for (const ExperimentRecord& rec : records) {
    if (rec.invalid) ++invalid;
    for (const RoundRecord& round : rec.rounds)
      if (round.timed_out) {
        ++timeouts;
        break;
      }
  }
  std::cout << "experiments=" << records.size() << " invalid=" << invalid
            << " timeouts=" << timeouts << "\n";
  if (!records.empty() && invalid == records.size()) {
    std::cerr << "error: every experiment was INVALID; check the campaign "
                 "configuration\n";
    return kExitCampaign;
  }
  return kExitOk;
}

int cmd_analyze(const std::string& results_dir, const std::string& campaign,
                const std::string& out,
                const std::vector<std::string>& drill) {
  std::filesystem::path results(results_dir);
  if (!std::filesystem::exists(results / "plan.json"))
    throw std::runtime_error("results directory has no plan.json; was `run` "
                             "executed with --out " +
                             results_dir + "?");
  InjectionPlan plan = load_plan(results / "plan.json");
  AnalysisConfig config = load_analysis_config(campaign);

  std::vector<ExperimentRecord> records = load_records(results);
  std::map<std::string, const ExperimentRecord*> by_id;
  for (const ExperimentRecord& r : records) by_id[r.point_id] = &r;
  for (const InjectionPoint& point : plan.points)
    if (by_id.count(point.id) == 0)
      throw std::runtime_error("missing record for point " + point.id + " (" +
                               point.file + ":" +
                               std::to_string(point.line_start) + ")");

  std::vector<Classification> classifications;
  size_t invalid = 0;
  for (const ExperimentRecord& rec : records) {
    if (rec.invalid) {
      ++invalid;
      continue;
    }
    classifications.push_back(classify_experiment(rec, config.rules));
  }

  MetricsReport report = compute_metrics(classifications, records, plan,
                                         config);
  write_file(out, report_to_json(report));
  std::cout << report_to_text(report);

  if (!drill.empty()) {
    DrillFilter filter;
    for (const std::string& term : drill) {
      size_t eq = term.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("bad --drill term '" + term +
                                 "'; expected key=value");
      std::string key = term.substr(0, eq);
      std::string value = term.substr(eq + 1);
      if (key == "mode") filter.mode = value;
      else if (key == "spec") filter.spec = value;
      else if (key == "component") filter.component = value;
      else
        throw std::runtime_error("bad --drill key '" + key +
                                 "'; expected mode, spec or component");
    }
    std::cout << render_drill_down(classifications, records, plan, config,
                                   filter);
  }
  std::cout << "classified=" << classifications.size()
            << " invalid=" << invalid << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"programmable fault injection for Python projects"};
  app.require_subcommand(1);

  // scan
  auto* scan = app.add_subcommand("scan", "match specs and write a plan");
  std::string scan_project_dir, scan_out, scan_filter, scan_component;
  std::string scan_components_file;
  SpecInputs scan_specs;
  long scan_sample = -1;
  uint64_t scan_seed = 0;
  int scan_workers = 0;
  scan->add_option("--project", scan_project_dir, "project root")->required();
  add_spec_options(scan, scan_specs);
  scan->add_option("--out", scan_out, "plan file to write")->required();
  auto* filter_opt = scan->add_option("--filter", scan_filter,
                                      "keep files matching this glob");
  auto* component_opt =
      scan->add_option("--component", scan_component,
                       "keep points in this component");
  auto* sample_opt = scan->add_option(
      "--sample", scan_sample, "sample N points without replacement");
  scan->add_option("--seed", scan_seed, "sampling seed");
  scan->add_option("--components", scan_components_file,
                   "JSON path-prefix to component-name map");
  scan->add_option("--workers", scan_workers,
                   "scan worker threads (0 = auto)");
  filter_opt->excludes(component_opt)->excludes(sample_opt);
  component_opt->excludes(sample_opt);

  // mutate
  auto* mutate = app.add_subcommand("mutate", "write one mutant to a dir");
  std::string mut_project, mut_plan, mut_point, mut_out, mut_mode = "plain";
  uint64_t mut_seed = 0;
  SpecInputs mut_specs;
  mutate->add_option("--project", mut_project, "project root")->required();
  add_spec_options(mutate, mut_specs);
  mutate->add_option("--plan", mut_plan, "plan file")->required();
  mutate->add_option("--point", mut_point, "injection point id")->required();
  mutate->add_option("--out", mut_out, "output directory")->required();
  mutate->add_option("--mode", mut_mode, "plain|triggered")
      ->check(CLI::IsMember({"plain", "triggered"}));
  mutate->add_option("--seed", mut_seed, "corruption seed");

  // coverage
  auto* coverage =
      app.add_subcommand("coverage", "fault-free run; write reduced plan");
  std::string cov_project, cov_plan, cov_campaign, cov_out;
  SpecInputs cov_specs;
  coverage->add_option("--project", cov_project, "project root")->required();
  add_spec_options(coverage, cov_specs);
  coverage->add_option("--plan", cov_plan, "plan file")->required();
  coverage->add_option("--campaign", cov_campaign, "campaign config")
      ->required();
  coverage->add_option("--out", cov_out, "reduced plan file")->required();

  // run
  auto* run = app.add_subcommand("run", "execute the campaign");
  std::string run_project, run_plan, run_campaign, run_out;
  int run_parallel = 0;
  SpecInputs run_specs;
  run->add_option("--project", run_project, "project root")->required();
  add_spec_options(run, run_specs);
  run->add_option("--plan", run_plan, "plan file")->required();
  run->add_option("--campaign", run_campaign, "campaign config")->required();
  run->add_option("--out", run_out, "results directory")->required();
  run->add_option("--parallel", run_parallel,
                  "cap concurrent sandboxes (further capped at N-1)");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "classify and report");
  std::string an_results, an_campaign, an_out;
  std::vector<std::string> an_drill;
  analyze->add_option("--results", an_results, "results directory")
      ->required();
  analyze->add_option("--campaign", an_campaign, "campaign config")
      ->required();
  analyze->add_option("--out", an_out, "report JSON to write")->required();
  analyze->add_option("--drill", an_drill,
                      "drill-down filter, e.g. mode=TIMEOUT spec=mfc");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (scan->parsed())
      return cmd_scan(scan_project_dir, scan_specs, scan_out, scan_filter,
                      scan_component, sample_opt->count() ? scan_sample : -1,
                      scan_seed, scan_components_file, scan_workers);
    if (mutate->parsed())
      return cmd_mutate(mut_project, mut_specs, mut_plan, mut_point, mut_out,
                        mut_mode, mut_seed);
    if (coverage->parsed())
      return cmd_coverage(cov_project, cov_specs, cov_plan, cov_campaign,
                          cov_out);
    if (run->parsed())
      return cmd_run(run_project, run_specs, run_plan, run_campaign, run_out,
                     run_parallel);
    if (analyze->parsed())
      return cmd_analyze(an_results, an_campaign, an_out, an_drill);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
