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

#ifndef FAULTINJ_EXECUTOR_HPP_
#define FAULTINJ_EXECUTOR_HPP_

#include <atomic>
#include <functional>
#include <set>

#include "faultinj/mutator.hpp"
#include "faultinj/scanner.hpp"
#include "faultinj/subprocess.hpp"

namespace faultinj {

enum class RoundMode { kSingle, kTwoRound };

struct SandboxConfig {
  enum class Backend { kProcess, kContainer };
  Backend backend = Backend::kProcess;
  std::string image_build_file;      // container backend only
  int max_parallel = 0;              // 0: N-1 rule decides
  double memory_threshold_pct = 0;   // 0: gate off
  double io_threshold_pct = 0;
};

struct CampaignConfig {
  std::vector<std::vector<std::string>> setup_commands;
  std::vector<std::string> target_command;     // empty: no persistent target
  std::vector<std::string> readiness_command;  // empty: fixed 1 s delay
  double readiness_timeout_s = 10.0;
  std::vector<std::vector<std::string>> workload_commands;
  RoundMode round_mode = RoundMode::kSingle;
  double experiment_timeout_s = 60.0;  // bounds the whole experiment
  std::vector<std::string> log_globs;
  std::map<std::string, std::string> env;
  SandboxConfig sandbox;
  uint64_t seed = 0;
};

// TWO_ROUND needs a persistent target to keep alive across rounds.
std::vector<Diagnostic> validate_campaign(const CampaignConfig& cfg);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

struct RoundRecord {
  bool ran = false;
  bool timed_out = false;
  std::vector<int> workload_exit_codes;
  bool target_alive_at_end = false;
  std::string workload_stdout;
  std::string workload_stderr;
  std::string target_stdout;  // slice of target output during this round
  std::string target_stderr;
  std::map<std::string, std::string> collected_logs;  // name -> text

  bool failed() const;  // any nonzero exit or timeout
};

struct ExperimentRecord {
  std::string point_id;
  bool invalid = false;  // setup failed; not a failure mode
  std::string invalid_reason;
  bool target_configured = false;  // campaign had a persistent target
  std::vector<RoundRecord> rounds;
  double wall_time_s = 0;
  bool coverage_hit = false;  // FAULTINJ-ACT marker seen anywhere
};

void save_record(const ExperimentRecord& record,
                 const std::filesystem::path& results_dir);
ExperimentRecord load_record(const std::filesystem::path& point_dir);
std::vector<ExperimentRecord> load_records(
    const std::filesystem::path& results_dir);

struct Utilization {
  double memory_pct = 0;
  double io_pct = 0;
};

class Executor {
 public:
  Executor(std::filesystem::path project_root, CampaignConfig cfg,
           std::filesystem::path results_dir);

  // 0 means "detect". Tests inject a core count to exercise the N-1 rule
  // regardless of the build host.
  void set_host_cores(int cores) { host_cores_ = cores; }
  int host_cores() const;
  // min(N-1, configured caps), never below 1.
  int effective_parallelism(int cli_override = 0) const;

  void set_utilization_probe(std::function<Utilization()> probe) {
    utilization_probe_ = std::move(probe);
  }

  ExperimentRecord run_experiment(const InjectionPoint& point,
                                  const MutantSource& mutant);

  // Every experiment runs exactly once; worker pool bounded by
  // effective_parallelism; results in plan order. Individual failures
  // never abort the campaign.
  std::vector<ExperimentRecord> run_campaign(
      const InjectionPlan& plan, const std::vector<MutantSource>& mutants,
      int parallel_override = 0);

  // Fault-free instrumented run; returns covered point ids. Throws when
  // the baseline workload fails (the baseline must pass).
  std::set<std::string> run_fault_free(const MutantSource& coverage_build);

  // Live sandbox count, for concurrency probes.
  int active_sandboxes() const { return active_.load(); }

  const std::filesystem::path& results_dir() const { return results_dir_; }

 private:
  struct Sandbox;
  ExperimentRecord run_process_experiment(const InjectionPoint& point,
                                          const MutantSource& mutant);
  ExperimentRecord run_container_experiment(const InjectionPoint& point,
                                            const MutantSource& mutant);
  void wait_for_utilization_headroom();

  std::filesystem::path project_root_;
  CampaignConfig cfg_;
  std::filesystem::path results_dir_;
  int host_cores_ = 0;
  std::atomic<int> active_{0};
  std::function<Utilization()> utilization_probe_;
};

// Stale covered ids are ignored with a warning in the selection note.
InjectionPlan reduce_plan(const InjectionPlan& plan,
                          const std::set<std::string>& covered);

// Root under which sandboxes are created: $FAULTINJ_HOME or the system
// temp directory.
std::filesystem::path sandbox_root();

// Command lines a container-backed sandbox would run, in order. The
// container engine binary is argv[0] of every entry; execution goes
// through the normal subprocess layer.
struct ContainerPlan {
  std::vector<std::vector<std::string>> setup;     // build, create, copy
  std::vector<std::vector<std::string>> teardown;  // rm -f
  std::string container_name;
  std::string image_tag;
};
ContainerPlan make_container_plan(const CampaignConfig& cfg,
                                  const std::string& point_id,
                                  const std::filesystem::path& staged_project);

// `docker exec` argv for one command inside a sandbox container.
std::vector<std::string> container_exec_command(
    const std::string& container_name,
    const std::map<std::string, std::string>& env,
    const std::vector<std::string>& argv, bool detached);

}  // namespace faultinj

#endif  // FAULTINJ_EXECUTOR_HPP_
