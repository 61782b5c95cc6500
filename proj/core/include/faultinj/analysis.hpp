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

#ifndef FAULTINJ_ANALYSIS_HPP_
#define FAULTINJ_ANALYSIS_HPP_

#include <regex>

#include "faultinj/executor.hpp"

namespace faultinj {

// Builtin mode names. Builtins rank above user rules:
// TIMEOUT > CRASH > user rules (config order) > WORKLOAD_FAILURE >
// NO_FAILURE.
inline constexpr const char* kModeTimeout = "TIMEOUT";
inline constexpr const char* kModeCrash = "CRASH";
inline constexpr const char* kModeWorkloadFailure = "WORKLOAD_FAILURE";
inline constexpr const char* kModeNoFailure = "NO_FAILURE";

enum class RuleScope { kWorkloadOutput, kTargetOutput, kLogFiles };

struct FailureModeRule {
  std::string name;
  RuleScope scope = RuleScope::kWorkloadOutput;
  std::string pattern;
  std::shared_ptr<const std::regex> regex;
  int priority = 0;  // config order; lower wins among user rules
};

struct AnalysisConfig {
  std::vector<FailureModeRule> rules;
  std::string error_log_pattern;  // failure-logging metric
  // Log artifact name glob -> component, for the propagation metric.
  std::vector<std::pair<std::string, std::string>> component_logs;
};

// Reads the optional "analysis" section of a campaign config file.
// Throws on duplicate rule names or regexes that do not compile.
AnalysisConfig load_analysis_config(const std::filesystem::path& path);

struct RoundClassification {
  std::vector<std::string> matched_modes;  // user rules, priority order
  bool timed_out = false;
  bool crash = false;
  bool workload_failure = false;
  std::string primary_mode;
  // Per log artifact: user rules that matched there (propagation).
  std::map<std::string, std::vector<std::string>> log_matches;
};

struct Classification {
  std::string point_id;
  std::vector<RoundClassification> rounds;
  std::string primary_mode;
  bool two_round = false;
};

// Pure function of (record, rules); requires a non-INVALID record.
Classification classify_experiment(const ExperimentRecord& record,
                                   const std::vector<FailureModeRule>& rules);

struct Metric {
  bool defined = false;
  double pct = 0;
  size_t numerator = 0;
  size_t denominator = 0;
};

struct DistributionTables {
  std::map<std::string, int> overall;
  std::map<std::string, std::map<std::string, int>> per_spec;
  std::map<std::string, std::map<std::string, int>> per_component;
};

DistributionTables compute_distribution(
    const std::vector<Classification>& classifications,
    const InjectionPlan& plan);

// Share of two-round experiments whose second round (fault disabled)
// still fails. UNDEFINED when there are no two-round experiments.
Metric availability_metric(const std::vector<Classification>& classifications);

// Share of workload-failing experiments that logged at least one line
// matching error_log_pattern. UNDEFINED without workload failures.
Metric logging_metric(const std::vector<Classification>& classifications,
                      const std::vector<ExperimentRecord>& records,
                      const std::string& error_log_pattern);

// Share of failing experiments whose rule matches appear in logs of two
// or more distinct components. Unmapped artifacts count as "unmapped".
Metric propagation_metric(
    const std::vector<Classification>& classifications,
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::pair<std::string, std::string>>& component_logs,
    std::vector<std::string>* warnings);

struct MetricsReport {
  DistributionTables distribution;
  Metric unavailability;
  Metric logging;
  Metric propagation;
  std::vector<std::string> warnings;
};

MetricsReport compute_metrics(const std::vector<Classification>& classifications,
                              const std::vector<ExperimentRecord>& records,
                              const InjectionPlan& plan,
                              const AnalysisConfig& config);

// Machine-readable report document.
std::string report_to_json(const MetricsReport& report);
// Human-readable tables, with the priority order documented in the
// header.
std::string report_to_text(const MetricsReport& report);

struct DrillFilter {
  std::string mode;       // empty: any
  std::string spec;
  std::string component;
};

// Experiment listing with matched-line excerpts (two lines of context on
// each side).
std::string render_drill_down(
    const std::vector<Classification>& classifications,
    const std::vector<ExperimentRecord>& records, const InjectionPlan& plan,
    const AnalysisConfig& config, const DrillFilter& filter);

}  // namespace faultinj

#endif  // FAULTINJ_ANALYSIS_HPP_
