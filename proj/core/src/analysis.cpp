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

#include "faultinj/analysis.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"

namespace faultinj {

namespace {

std::shared_ptr<const std::regex> compile_rule_regex(
    const std::string& pattern, const std::string& where) {
  try {
    return std::make_shared<const std::regex>(
        pattern, std::regex::ECMAScript | std::regex::multiline);
  } catch (const std::regex_error& e) {
    throw std::runtime_error("analysis config: bad regex in " + where + ": " +
                             e.what());
  }
}

RuleScope scope_from_string(const std::string& s, const std::string& where) {
  if (s == "workload_output") return RuleScope::kWorkloadOutput;
  if (s == "target_output") return RuleScope::kTargetOutput;
  if (s == "log_files") return RuleScope::kLogFiles;
  throw std::runtime_error(
      "analysis config: " + where +
      ": scope must be workload_output, target_output or log_files");
}

}  // namespace

AnalysisConfig load_analysis_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("campaign config " + path.string() +
                             " is not valid JSON: " + e.what());
  }
  AnalysisConfig cfg;
  if (!doc.contains("analysis")) return cfg;
  const auto& a = doc["analysis"];
  if (a.contains("failure_modes")) {
    std::set<std::string> names;
    int priority = 0;
    for (const auto& r : a["failure_modes"]) {
      FailureModeRule rule;
      rule.name = r.at("name").get<std::string>();
      if (!names.insert(rule.name).second)
        throw std::runtime_error("analysis config: duplicate failure mode '" +
                                 rule.name + "'");
      rule.scope = scope_from_string(r.value("scope", "workload_output"),
                                     rule.name);
      rule.pattern = r.at("pattern").get<std::string>();
      rule.regex = compile_rule_regex(rule.pattern, rule.name);
      rule.priority = priority++;
      cfg.rules.push_back(std::move(rule));
    }
  }
  cfg.error_log_pattern = a.value("error_log_pattern", "");
  if (!cfg.error_log_pattern.empty())
    compile_rule_regex(cfg.error_log_pattern, "error_log_pattern");
  if (a.contains("component_logs"))
    for (auto& [glob, component] : a["component_logs"].items())
      cfg.component_logs.emplace_back(glob, component.get<std::string>());
  return cfg;
}

Classification classify_experiment(const ExperimentRecord& record,
                                   const std::vector<FailureModeRule>& rules) {
  if (record.invalid)
    throw std::invalid_argument("cannot classify an INVALID experiment");

  Classification out;
  out.point_id = record.point_id;
  out.two_round = record.rounds.size() == 2;

  for (const RoundRecord& round : record.rounds) {
    RoundClassification rc;
    rc.timed_out = round.timed_out;
    rc.crash = record.target_configured && round.ran &&
               !round.target_alive_at_end;
    for (int code : round.workload_exit_codes)
      if (code != 0) rc.workload_failure = true;

    for (const FailureModeRule& rule : rules) {
      bool matched = false;
      switch (rule.scope) {
        case RuleScope::kWorkloadOutput:
          matched = std::regex_search(round.workload_stdout, *rule.regex) ||
                    std::regex_search(round.workload_stderr, *rule.regex);
          break;
        case RuleScope::kTargetOutput:
          matched = std::regex_search(round.target_stdout, *rule.regex) ||
                    std::regex_search(round.target_stderr, *rule.regex);
          break;
        case RuleScope::kLogFiles:
          for (const auto& [name, text] : round.collected_logs) {
            if (std::regex_search(text, *rule.regex)) {
              matched = true;
              rc.log_matches[name].push_back(rule.name);
            }
          }
          break;
      }
      if (matched) rc.matched_modes.push_back(rule.name);
    }

    if (rc.timed_out) {
      rc.primary_mode = kModeTimeout;
    } else if (rc.crash) {
      rc.primary_mode = kModeCrash;
    } else if (!rc.matched_modes.empty()) {
      rc.primary_mode = rc.matched_modes.front();
    } else if (rc.workload_failure) {
      rc.primary_mode = kModeWorkloadFailure;
    } else {
      rc.primary_mode = kModeNoFailure;
    }
    out.rounds.push_back(std::move(rc));
  }

  // Experiment-level primary mode: most diagnostic across rounds.
  bool any_timeout = false, any_crash = false, any_workload = false;
  std::string best_user;
  int best_priority = INT_MAX;
  for (const RoundClassification& rc : out.rounds) {
    any_timeout |= rc.timed_out;
    any_crash |= rc.crash;
    any_workload |= rc.workload_failure;
    for (const std::string& mode : rc.matched_modes) {
      for (const FailureModeRule& rule : rules) {
        if (rule.name == mode && rule.priority < best_priority) {
          best_priority = rule.priority;
          best_user = rule.name;
        }
      }
    }
  }
  if (any_timeout) out.primary_mode = kModeTimeout;
  else if (any_crash) out.primary_mode = kModeCrash;
  else if (!best_user.empty()) out.primary_mode = best_user;
  else if (any_workload) out.primary_mode = kModeWorkloadFailure;
  else out.primary_mode = kModeNoFailure;
  return out;
}

DistributionTables compute_distribution(
    const std::vector<Classification>& classifications,
    const InjectionPlan& plan) {
  std::map<std::string, const InjectionPoint*> by_id;
  for (const auto& p : plan.points) by_id[p.id] = &p;

  DistributionTables tables;
  for (const Classification& c : classifications) {
    tables.overall[c.primary_mode]++;
    auto it = by_id.find(c.point_id);
    if (it != by_id.end()) {
      tables.per_spec[it->second->spec_name][c.primary_mode]++;
      tables.per_component[it->second->component][c.primary_mode]++;
    }
  }
  return tables;
}

Metric availability_metric(
    const std::vector<Classification>& classifications) {
  Metric m;
  for (const Classification& c : classifications) {
    if (!c.two_round) continue;
    ++m.denominator;
    const RoundClassification& second = c.rounds[1];
    if (second.primary_mode != kModeNoFailure) ++m.numerator;
  }
  if (m.denominator == 0) return m;
  m.defined = true;
  m.pct = 100.0 * static_cast<double>(m.numerator) /
          static_cast<double>(m.denominator);
  return m;
}

Metric logging_metric(const std::vector<Classification>& classifications,
                      const std::vector<ExperimentRecord>& records,
                      const std::string& error_log_pattern) {
  Metric m;
  if (error_log_pattern.empty()) return m;
  std::regex regex(error_log_pattern,
                   std::regex::ECMAScript | std::regex::multiline);
  std::map<std::string, const ExperimentRecord*> by_id;
  for (const auto& r : records) by_id[r.point_id] = &r;

  for (const Classification& c : classifications) {
    bool workload_failed = false;
    for (const RoundClassification& rc : c.rounds)
      workload_failed |= rc.workload_failure;
    if (!workload_failed) continue;
    ++m.denominator;

    const ExperimentRecord* rec = by_id.count(c.point_id)
                                      ? by_id.at(c.point_id)
                                      : nullptr;
    if (rec == nullptr) continue;
    bool logged = false;
    for (const RoundRecord& round : rec->rounds) {
      for (const auto& [name, text] : round.collected_logs) {
        for (const std::string& line : split_lines(text)) {
          if (std::regex_search(line, regex)) {
            logged = true;
            break;
          }
        }
        if (logged) break;
      }
      if (logged) break;
    }
    if (logged) ++m.numerator;
  }
  if (m.denominator == 0) return m;
  m.defined = true;
  m.pct = 100.0 * static_cast<double>(m.numerator) /
          static_cast<double>(m.denominator);
  return m;
}

namespace {

std::string component_for_artifact(
    const std::vector<std::pair<std::string, std::string>>& component_logs,
    const std::string& artifact, bool* mapped) {
  for (const auto& [glob, component] : component_logs) {
    if (path_glob_match(glob, artifact) || glob_match(glob, artifact)) {
      *mapped = true;
      return component;
    }
  }
  *mapped = false;
  return "unmapped";
}

}  // namespace

Metric propagation_metric(
    const std::vector<Classification>& classifications,
    const std::vector<ExperimentRecord>& records,
    const std::vector<std::pair<std::string, std::string>>& component_logs,
    std::vector<std::string>* warnings) {
  (void)records;
  Metric m;
  std::set<std::string> warned;
  for (const Classification& c : classifications) {
    if (c.primary_mode == kModeNoFailure) continue;
    ++m.denominator;
    std::set<std::string> components;
    for (const RoundClassification& rc : c.rounds) {
      for (const auto& [artifact, modes] : rc.log_matches) {
        (void)modes;
        bool mapped = false;
        std::string component =
            component_for_artifact(component_logs, artifact, &mapped);
        if (!mapped && warnings != nullptr && warned.insert(artifact).second)
          warnings->push_back("log artifact '" + artifact +
                              "' has no component mapping; counted as "
                              "'unmapped'");
        components.insert(component);
      }
    }
    if (components.size() >= 2) ++m.numerator;
  }
  if (m.denominator == 0) return m;
  m.defined = true;
  m.pct = 100.0 * static_cast<double>(m.numerator) /
          static_cast<double>(m.denominator);
  return m;
}

MetricsReport compute_metrics(
    const std::vector<Classification>& classifications,
    const std::vector<ExperimentRecord>& records, const InjectionPlan& plan,
    const AnalysisConfig& config) {
  MetricsReport report;
  report.distribution = compute_distribution(classifications, plan);
  report.unavailability = availability_metric(classifications);
  report.logging =
      logging_metric(classifications, records, config.error_log_pattern);
  report.propagation = propagation_metric(
      classifications, records, config.component_logs, &report.warnings);
  return report;
}

namespace {

nlohmann::ordered_json metric_to_json(const Metric& m) {
  if (!m.defined) return "UNDEFINED";
  return m.pct;
}

void append_metric_text(std::ostream& os, const std::string& name,
                        const Metric& m) {
  os << name << ": ";
  if (!m.defined) {
    os << "UNDEFINED (denominator 0)";
  } else {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f%% (%zu/%zu)", m.pct, m.numerator,
                  m.denominator);
    os << buf;
  }
  os << "\n";
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json doc;
  doc["distribution"] = report.distribution.overall;
  doc["per_spec"] = report.distribution.per_spec;
  doc["per_component"] = report.distribution.per_component;
  doc["unavailability_pct"] = metric_to_json(report.unavailability);
  doc["logging_pct"] = metric_to_json(report.logging);
  doc["propagation_pct"] = metric_to_json(report.propagation);
  doc["denominators"] = {
      {"unavailability", report.unavailability.denominator},
      {"logging", report.logging.denominator},
      {"propagation", report.propagation.denominator},
  };
  if (!report.warnings.empty()) doc["warnings"] = report.warnings;
  return doc.dump(2) + "\n";
}

std::string report_to_text(const MetricsReport& report) {
  std::ostringstream os;
  os << "failure mode distribution (priority: TIMEOUT > CRASH > user rules > "
        "WORKLOAD_FAILURE > NO_FAILURE)\n";
  int total = 0;
  for (const auto& [mode, count] : report.distribution.overall)
    total += count;
  for (const auto& [mode, count] : report.distribution.overall)
    os << "  " << mode << ": " << count << "\n";
  os << "  total: " << total << "\n";
  auto table = [&](const char* title,
                   const std::map<std::string, std::map<std::string, int>>&
                       rows) {
    if (rows.empty()) return;
    os << title << "\n";
    for (const auto& [row, counts] : rows) {
      os << "  " << row << ":";
      for (const auto& [mode, count] : counts)
        os << " " << mode << "=" << count;
      os << "\n";
    }
  };
  table("by fault type", report.distribution.per_spec);
  table("by component", report.distribution.per_component);
  append_metric_text(os, "service unavailability (round 2)",
                     report.unavailability);
  append_metric_text(os, "failure logging", report.logging);
  append_metric_text(os, "failure propagation", report.propagation);
  for (const std::string& w : report.warnings) os << "warning: " << w << "\n";
  return os.str();
}

namespace {

// Excerpt of every line matching `regex`, with two lines of context.
void append_excerpts(std::ostream& os, const std::string& label,
                     const std::string& text, const std::regex& regex) {
  std::vector<std::string> lines = split_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (!std::regex_search(lines[i], regex)) continue;
    os << "    " << label << ":" << (i + 1) << "\n";
    size_t from = i >= 2 ? i - 2 : 0;
    size_t to = std::min(lines.size(), i + 3);
    for (size_t k = from; k < to; ++k)
      os << "      " << (k == i ? "> " : "  ") << lines[k] << "\n";
  }
}

}  // namespace

std::string render_drill_down(
    const std::vector<Classification>& classifications,
    const std::vector<ExperimentRecord>& records, const InjectionPlan& plan,
    const AnalysisConfig& config, const DrillFilter& filter) {
  std::map<std::string, const InjectionPoint*> by_id;
  for (const auto& p : plan.points) by_id[p.id] = &p;
  std::map<std::string, const ExperimentRecord*> rec_by_id;
  for (const auto& r : records) rec_by_id[r.point_id] = &r;

  std::ostringstream os;
  size_t shown = 0;
  for (const Classification& c : classifications) {
    const InjectionPoint* point =
        by_id.count(c.point_id) ? by_id.at(c.point_id) : nullptr;
    if (!filter.mode.empty() && c.primary_mode != filter.mode) continue;
    if (!filter.spec.empty() &&
        (point == nullptr || point->spec_name != filter.spec))
      continue;
    if (!filter.component.empty() &&
        (point == nullptr || point->component != filter.component))
      continue;
    ++shown;
    os << c.point_id << " primary=" << c.primary_mode;
    if (point != nullptr)
      os << " spec=" << point->spec_name << " component=" << point->component
         << " " << point->file << ":" << point->line_start;
    os << "\n";

    const ExperimentRecord* rec =
        rec_by_id.count(c.point_id) ? rec_by_id.at(c.point_id) : nullptr;
    if (rec == nullptr) continue;
    for (size_t round = 0; round < c.rounds.size(); ++round) {
      const RoundClassification& rc = c.rounds[round];
      if (rc.matched_modes.empty()) continue;
      const RoundRecord& rr = rec->rounds[round];
      os << "  round " << (round + 1) << " matched:";
      for (const std::string& mode : rc.matched_modes) os << " " << mode;
      os << "\n";
      for (const FailureModeRule& rule : config.rules) {
        if (std::find(rc.matched_modes.begin(), rc.matched_modes.end(),
                      rule.name) == rc.matched_modes.end())
          continue;
        switch (rule.scope) {
          case RuleScope::kWorkloadOutput:
            append_excerpts(os, "workload.out", rr.workload_stdout,
                            *rule.regex);
            append_excerpts(os, "workload.err", rr.workload_stderr,
                            *rule.regex);
            break;
          case RuleScope::kTargetOutput:
            append_excerpts(os, "target.out", rr.target_stdout, *rule.regex);
            append_excerpts(os, "target.err", rr.target_stderr, *rule.regex);
            break;
          case RuleScope::kLogFiles:
            for (const auto& [name, text] : rr.collected_logs)
              append_excerpts(os, name, text, *rule.regex);
            break;
        }
      }
    }
  }
  os << "experiments listed: " << shown << "\n";
  return os.str();
}

}  // namespace faultinj
