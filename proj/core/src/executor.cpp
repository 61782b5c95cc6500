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

#include "faultinj/executor.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace faultinj {

namespace {

std::chrono::steady_clock::time_point deadline_after(double seconds) {
  return std::chrono::steady_clock::now() +
         std::chrono::microseconds(static_cast<int64_t>(seconds * 1e6));
}

int exit_code_of(const ExitStatus& st) {
  if (st.timed_out) return -1;
  if (st.signaled) return 128 + st.term_signal;
  return st.exit_code;
}

std::string read_file_or_empty(const std::filesystem::path& p) {
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return "";
  try {
    return read_file(p);
  } catch (...) {
    return "";
  }
}

size_t file_size_or_zero(const std::filesystem::path& p) {
  std::error_code ec;
  auto s = std::filesystem::file_size(p, ec);
  return ec ? 0 : static_cast<size_t>(s);
}

std::string slice_file(const std::filesystem::path& p, size_t from) {
  std::string all = read_file_or_empty(p);
  if (from >= all.size()) return "";
  return all.substr(from);
}

bool contains_marker(const std::string& text, const std::string& marker) {
  return text.find(marker) != std::string::npos;
}

std::atomic<uint64_t> g_sandbox_seq{0};

}  // namespace

bool RoundRecord::failed() const {
  if (!ran || timed_out) return true;
  for (int code : workload_exit_codes)
    if (code != 0) return true;
  return false;
}

std::vector<Diagnostic> validate_campaign(const CampaignConfig& cfg) {
  std::vector<Diagnostic> diags;
  if (cfg.round_mode == RoundMode::kTwoRound && cfg.target_command.empty())
    diags.push_back({"two-round-target",
                     "round_mode two_round requires a target_command to keep "
                     "alive across rounds",
                     {}});
  if (cfg.experiment_timeout_s <= 0)
    diags.push_back({"timeout", "experiment_timeout_s must be > 0", {}});
  if (cfg.workload_commands.empty())
    diags.push_back({"workload", "at least one workload command is required",
                     {}});
  if (cfg.sandbox.backend == SandboxConfig::Backend::kContainer &&
      cfg.sandbox.image_build_file.empty())
    diags.push_back({"container-image",
                     "container backend requires image_build_file", {}});
  if (cfg.sandbox.max_parallel < 0)
    diags.push_back({"parallel", "max_parallel must be >= 1 when set", {}});
  return diags;
}

namespace {

std::vector<std::vector<std::string>> parse_command_list(
    const nlohmann::json& node, const std::string& at) {
  if (!node.is_array())
    throw std::runtime_error("campaign config: " + at +
                             " must be an array of argv arrays");
  std::vector<std::vector<std::string>> out;
  for (size_t i = 0; i < node.size(); ++i) {
    const auto& cmd = node[i];
    if (!cmd.is_array() || cmd.empty())
      throw std::runtime_error("campaign config: " + at + "/" +
                               std::to_string(i) +
                               " must be a non-empty argv array");
    std::vector<std::string> argv;
    for (const auto& a : cmd) argv.push_back(a.get<std::string>());
    out.push_back(std::move(argv));
  }
  return out;
}

std::vector<std::string> parse_argv(const nlohmann::json& node,
                                    const std::string& at) {
  if (!node.is_array())
    throw std::runtime_error("campaign config: " + at +
                             " must be an argv array");
  std::vector<std::string> argv;
  for (const auto& a : node) argv.push_back(a.get<std::string>());
  return argv;
}

}  // namespace

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("campaign config " + path.string() +
                             " is not valid JSON: " + e.what());
  }
  CampaignConfig cfg;
  if (doc.contains("setup_commands"))
    cfg.setup_commands =
        parse_command_list(doc["setup_commands"], "/setup_commands");
  if (doc.contains("target_command"))
    cfg.target_command = parse_argv(doc["target_command"], "/target_command");
  if (doc.contains("readiness_command"))
    cfg.readiness_command =
        parse_argv(doc["readiness_command"], "/readiness_command");
  cfg.readiness_timeout_s = doc.value("readiness_timeout_s", 10.0);
  if (doc.contains("workload_commands"))
    cfg.workload_commands =
        parse_command_list(doc["workload_commands"], "/workload_commands");
  std::string mode = doc.value("round_mode", "single");
  if (mode == "single") {
    cfg.round_mode = RoundMode::kSingle;
  } else if (mode == "two_round") {
    cfg.round_mode = RoundMode::kTwoRound;
  } else {
    throw std::runtime_error(
        "campaign config: round_mode must be single or two_round");
  }
  cfg.experiment_timeout_s = doc.value("experiment_timeout_s", 60.0);
  if (doc.contains("log_globs"))
    for (const auto& g : doc["log_globs"]) cfg.log_globs.push_back(g);
  if (doc.contains("env"))
    for (auto& [k, v] : doc["env"].items())
      cfg.env[k] = v.get<std::string>();
  cfg.seed = doc.value("seed", 0ull);
  if (doc.contains("sandbox")) {
    const auto& sb = doc["sandbox"];
    std::string backend = sb.value("backend", "process");
    if (backend == "process") {
      cfg.sandbox.backend = SandboxConfig::Backend::kProcess;
    } else if (backend == "container") {
      cfg.sandbox.backend = SandboxConfig::Backend::kContainer;
    } else {
      throw std::runtime_error(
          "campaign config: sandbox.backend must be process or container");
    }
    cfg.sandbox.image_build_file = sb.value("image_build_file", "");
    cfg.sandbox.max_parallel = sb.value("max_parallel", 0);
    cfg.sandbox.memory_threshold_pct = sb.value("memory_threshold_pct", 0.0);
    cfg.sandbox.io_threshold_pct = sb.value("io_threshold_pct", 0.0);
  }
  std::vector<Diagnostic> diags = validate_campaign(cfg);
  if (!diags.empty())
    throw std::runtime_error("campaign config: " + diags.front().message);
  return cfg;
}

// --- record persistence ---------------------------------------------------

namespace {

nlohmann::ordered_json round_to_json(const RoundRecord& r) {
  nlohmann::ordered_json j;
  j["ran"] = r.ran;
  j["timed_out"] = r.timed_out;
  j["workload_exit_codes"] = r.workload_exit_codes;
  j["target_alive_at_end"] = r.target_alive_at_end;
  j["workload_stdout"] = r.workload_stdout;
  j["workload_stderr"] = r.workload_stderr;
  j["target_stdout"] = r.target_stdout;
  j["target_stderr"] = r.target_stderr;
  j["collected_logs"] = r.collected_logs;
  return j;
}

RoundRecord round_from_json(const nlohmann::json& j) {
  RoundRecord r;
  r.ran = j.value("ran", false);
  r.timed_out = j.value("timed_out", false);
  if (j.contains("workload_exit_codes"))
    for (const auto& c : j["workload_exit_codes"])
      r.workload_exit_codes.push_back(c.get<int>());
  r.target_alive_at_end = j.value("target_alive_at_end", false);
  r.workload_stdout = j.value("workload_stdout", "");
  r.workload_stderr = j.value("workload_stderr", "");
  r.target_stdout = j.value("target_stdout", "");
  r.target_stderr = j.value("target_stderr", "");
  if (j.contains("collected_logs"))
    for (auto& [k, v] : j["collected_logs"].items())
      r.collected_logs[k] = v.get<std::string>();
  return r;
}

}  // namespace

void save_record(const ExperimentRecord& record,
                 const std::filesystem::path& results_dir) {
  nlohmann::ordered_json j;
  j["point_id"] = record.point_id;
  j["invalid"] = record.invalid;
  j["invalid_reason"] = record.invalid_reason;
  j["target_configured"] = record.target_configured;
  j["wall_time_s"] = record.wall_time_s;
  j["coverage_hit"] = record.coverage_hit;
  j["rounds"] = nlohmann::ordered_json::array();
  for (const auto& r : record.rounds) j["rounds"].push_back(round_to_json(r));
  write_file(results_dir / record.point_id / "record.json", j.dump(2) + "\n");
}

ExperimentRecord load_record(const std::filesystem::path& point_dir) {
  nlohmann::json j = nlohmann::json::parse(read_file(point_dir / "record.json"));
  ExperimentRecord rec;
  rec.point_id = j.value("point_id", "");
  rec.invalid = j.value("invalid", false);
  rec.invalid_reason = j.value("invalid_reason", "");
  rec.target_configured = j.value("target_configured", false);
  rec.wall_time_s = j.value("wall_time_s", 0.0);
  rec.coverage_hit = j.value("coverage_hit", false);
  if (j.contains("rounds"))
    for (const auto& r : j["rounds"]) rec.rounds.push_back(round_from_json(r));
  return rec;
}

std::vector<ExperimentRecord> load_records(
    const std::filesystem::path& results_dir) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(results_dir))
    if (entry.is_directory() &&
        std::filesystem::exists(entry.path() / "record.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<ExperimentRecord> out;
  for (const auto& d : dirs) out.push_back(load_record(d));
  return out;
}

// --- sandboxes -------------------------------------------------------------

std::filesystem::path sandbox_root() {
  const char* home = std::getenv("FAULTINJ_HOME");
  if (home != nullptr && *home != '\0') return home;
  return std::filesystem::temp_directory_path();
}

struct Executor::Sandbox {
  std::filesystem::path dir;
  std::filesystem::path project;
  std::filesystem::path trigger;
  std::atomic<int>* counter = nullptr;
  std::optional<ChildProcess> target;

  ~Sandbox() {
    if (target && target->valid()) target->kill_group();
    std::error_code ec;
    std::filesystem::remove_all(dir, ec);
    if (counter != nullptr) counter->fetch_sub(1);
  }
};

Executor::Executor(std::filesystem::path project_root, CampaignConfig cfg,
                   std::filesystem::path results_dir)
    : project_root_(std::move(project_root)),
      cfg_(std::move(cfg)),
      results_dir_(std::move(results_dir)) {}

int Executor::host_cores() const {
  if (host_cores_ > 0) return host_cores_;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

int Executor::effective_parallelism(int cli_override) const {
  int p = std::max(1, host_cores() - 1);
  if (cfg_.sandbox.max_parallel > 0)
    p = std::min(p, cfg_.sandbox.max_parallel);
  if (cli_override > 0) p = std::min(p, cli_override);
  return std::max(1, p);
}

namespace {

Utilization default_utilization_probe() {
  Utilization u;
  std::ifstream mi("/proc/meminfo");
  long total = 0, avail = 0;
  std::string key;
  long value;
  std::string unit;
  while (mi >> key >> value >> unit) {
    if (key == "MemTotal:") total = value;
    if (key == "MemAvailable:") avail = value;
  }
  if (total > 0)
    u.memory_pct = 100.0 * static_cast<double>(total - avail) / total;

  // Busiest-disk utilization from /proc/diskstats deltas.
  static std::mutex mu;
  static std::map<std::string, long> last_ms;
  static auto last_at = std::chrono::steady_clock::now();
  std::lock_guard<std::mutex> lock(mu);
  auto now = std::chrono::steady_clock::now();
  double interval_ms =
      std::chrono::duration<double, std::milli>(now - last_at).count();
  std::ifstream ds("/proc/diskstats");
  std::string line;
  double busiest = 0;
  while (std::getline(ds, line)) {
    std::istringstream ls(line);
    long major, minor;
    std::string dev;
    long fields[11] = {0};
    ls >> major >> minor >> dev;
    for (int i = 0; i < 11 && ls; ++i) ls >> fields[i];
    long io_ms = fields[9];  // field 13 overall: ms spent doing I/O
    auto it = last_ms.find(dev);
    if (it != last_ms.end() && interval_ms > 1.0) {
      double pct = 100.0 * static_cast<double>(io_ms - it->second) /
                   interval_ms;
      busiest = std::max(busiest, pct);
    }
    last_ms[dev] = io_ms;
  }
  last_at = now;
  u.io_pct = std::min(100.0, busiest);
  return u;
}

}  // namespace

void Executor::wait_for_utilization_headroom() {
  const auto& sb = cfg_.sandbox;
  if (sb.memory_threshold_pct <= 0 && sb.io_threshold_pct <= 0) return;
  auto probe = utilization_probe_ ? utilization_probe_
                                  : default_utilization_probe;
  for (;;) {
    Utilization u = probe();
    bool over = (sb.memory_threshold_pct > 0 &&
                 u.memory_pct > sb.memory_threshold_pct) ||
                (sb.io_threshold_pct > 0 && u.io_pct > sb.io_threshold_pct);
    if (!over) return;
    std::this_thread::sleep_for(std::chrono::seconds(1));
  }
}

ExperimentRecord Executor::run_experiment(const InjectionPoint& point,
                                          const MutantSource& mutant) {
  if (cfg_.sandbox.backend == SandboxConfig::Backend::kContainer)
    return run_container_experiment(point, mutant);
  return run_process_experiment(point, mutant);
}

namespace {

std::string shell_quote(const std::vector<std::string>& argv) {
  std::string out;
  for (const std::string& a : argv) {
    if (!out.empty()) out += " ";
    out += "'";
    for (char c : a) {
      if (c == '\'') out += "'\\''";
      else out.push_back(c);
    }
    out += "'";
  }
  return out;
}

}  // namespace

std::vector<std::string> container_exec_command(
    const std::string& container_name,
    const std::map<std::string, std::string>& env,
    const std::vector<std::string>& argv, bool detached) {
  std::vector<std::string> cmd = {"docker", "exec", "-w", "/project"};
  if (detached) cmd.push_back("-d");
  for (const auto& [k, v] : env) {
    cmd.push_back("-e");
    cmd.push_back(k + "=" + v);
  }
  cmd.push_back(container_name);
  cmd.push_back("sh");
  cmd.push_back("-c");
  cmd.push_back(shell_quote(argv));
  return cmd;
}

// Container experiments mirror the process flow through the engine CLI:
// build image, start an idle container, copy the mutated project, run
// setup/workload via exec, flip the trigger file with exec, destroy the
// container. A missing engine marks the experiment INVALID.
ExperimentRecord Executor::run_container_experiment(
    const InjectionPoint& point, const MutantSource& mutant) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentRecord rec;
  rec.point_id = point.id;
  rec.target_configured = !cfg_.target_command.empty();
  int round_count = cfg_.round_mode == RoundMode::kTwoRound ? 2 : 1;

  std::filesystem::path stage =
      sandbox_root() / ("faultinj-stage-" + std::to_string(::getpid()) + "-" +
                        std::to_string(g_sandbox_seq.fetch_add(1)));
  active_.fetch_add(1);
  ContainerPlan plan = make_container_plan(cfg_, point.id, stage);
  auto deadline = deadline_after(cfg_.experiment_timeout_s);
  std::filesystem::path results = results_dir_ / point.id;

  std::map<std::string, std::string> env = cfg_.env;
  env[kTriggerEnvVar] = "/project/.faultinj_trigger";
  env[kCoverageEnvVar] = "";
  env[kSeedEnvVar] = std::to_string(cfg_.seed);

  auto engine = [&](const std::vector<std::string>& argv,
                    const std::string& out_path = "/dev/null") {
    SpawnSpec spec;
    spec.argv = argv;
    spec.stdout_path = out_path;
    spec.stderr_path = (stage / "engine.err").string();
    return run_command(spec, deadline);
  };
  auto cleanup = [&]() {
    for (const auto& argv : plan.teardown) {
      try {
        engine(argv);
      } catch (...) {
      }
    }
    std::error_code ec;
    std::filesystem::remove_all(stage, ec);
    active_.fetch_sub(1);
  };
  auto finish = [&]() {
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    cleanup();
    save_record(rec, results_dir_);
    return rec;
  };

  try {
    std::filesystem::create_directories(stage);
    std::filesystem::copy(project_root_, stage,
                          std::filesystem::copy_options::recursive);
    for (const auto& [rel, text] : mutant.files) write_file(stage / rel, text);
    write_file(stage / kHelperModuleName, mutant.helper_module);
    write_file(stage / ".faultinj_trigger", "0");

    for (const auto& argv : plan.setup) {
      if (!engine(argv).ok()) {
        rec.invalid = true;
        rec.invalid_reason = "container engine command failed: " + argv[0] +
                             " " + argv[1];
        while (static_cast<int>(rec.rounds.size()) < round_count)
          rec.rounds.push_back(RoundRecord{});
        return finish();
      }
    }
    for (const auto& argv : cfg_.setup_commands) {
      if (!engine(container_exec_command(plan.container_name, env, argv,
                                         false))
               .ok()) {
        rec.invalid = true;
        rec.invalid_reason = "setup command failed in container";
        while (static_cast<int>(rec.rounds.size()) < round_count)
          rec.rounds.push_back(RoundRecord{});
        return finish();
      }
    }
    if (!cfg_.target_command.empty()) {
      std::string launch = "cd /project && " +
                           shell_quote(cfg_.target_command) +
                           " > .fi_target.out 2> .fi_target.err & echo $! > "
                           ".fi_target.pid";
      engine({"docker", "exec", "-w", "/project", plan.container_name, "sh",
              "-c", launch});
      std::this_thread::sleep_for(std::chrono::seconds(1));
    }

    bool timed_out = false;
    for (int round = 1; round <= round_count && !timed_out; ++round) {
      RoundRecord rr;
      rr.ran = true;
      engine({"docker", "exec", plan.container_name, "sh", "-c",
              std::string("echo ") + (round == 1 ? "1" : "0") +
                  " > /project/.faultinj_trigger"});
      std::filesystem::path round_dir =
          results / ("round" + std::to_string(round));
      std::filesystem::create_directories(round_dir);
      for (const auto& argv : cfg_.workload_commands) {
        ExitStatus st =
            engine(container_exec_command(plan.container_name, env, argv,
                                          false),
                   (round_dir / "workload.out").string());
        if (st.timed_out) {
          rr.timed_out = true;
          rr.workload_exit_codes.push_back(-1);
          timed_out = true;
          break;
        }
        rr.workload_exit_codes.push_back(exit_code_of(st));
      }
      rr.workload_stdout = read_file_or_empty(round_dir / "workload.out");
      if (!cfg_.target_command.empty()) {
        rr.target_alive_at_end =
            engine({"docker", "exec", plan.container_name, "sh", "-c",
                    "kill -0 $(cat /project/.fi_target.pid)"})
                .ok();
        engine({"docker", "exec", plan.container_name, "cat",
                "/project/.fi_target.out"},
               (round_dir / "target.out").string());
        rr.target_stdout = read_file_or_empty(round_dir / "target.out");
      }
      rec.rounds.push_back(std::move(rr));
    }
    while (static_cast<int>(rec.rounds.size()) < round_count) {
      RoundRecord rr;
      rr.timed_out = timed_out;
      rec.rounds.push_back(std::move(rr));
    }
  } catch (const std::exception& e) {
    rec.invalid = true;
    rec.invalid_reason = std::string("container engine unavailable: ") +
                         e.what();
    while (static_cast<int>(rec.rounds.size()) < round_count)
      rec.rounds.push_back(RoundRecord{});
  }
  return finish();
}

ExperimentRecord Executor::run_process_experiment(const InjectionPoint& point,
                                                  const MutantSource& mutant) {
  auto t0 = std::chrono::steady_clock::now();
  ExperimentRecord rec;
  rec.point_id = point.id;
  rec.target_configured = !cfg_.target_command.empty();

  int round_count = cfg_.round_mode == RoundMode::kTwoRound ? 2 : 1;
  auto fill_missing_rounds = [&](bool timed_out) {
    while (static_cast<int>(rec.rounds.size()) < round_count) {
      RoundRecord rr;
      rr.ran = false;
      rr.timed_out = timed_out;
      rec.rounds.push_back(std::move(rr));
    }
  };

  Sandbox sandbox;
  sandbox.dir = sandbox_root() /
                ("faultinj-sbx-" + std::to_string(::getpid()) + "-" +
                 std::to_string(g_sandbox_seq.fetch_add(1)) + "-" + point.id);
  sandbox.project = sandbox.dir / "project";
  sandbox.trigger = sandbox.dir / "trigger.flag";
  sandbox.counter = &active_;
  active_.fetch_add(1);

  std::filesystem::path results = results_dir_ / point.id;
  // The activation marker carries the id baked into the mutant.
  std::string marker_id =
      mutant.point_id.empty() ? point.id : mutant.point_id;
  auto finish = [&]() {
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    for (const RoundRecord& r : rec.rounds) {
      std::string marker = std::string(kActivationMarker) + " " + marker_id;
      if (contains_marker(r.workload_stdout, marker) ||
          contains_marker(r.workload_stderr, marker) ||
          contains_marker(r.target_stdout, marker) ||
          contains_marker(r.target_stderr, marker))
        rec.coverage_hit = true;
    }
    save_record(rec, results_dir_);
    return rec;
  };

  try {
    std::filesystem::create_directories(sandbox.project);
    std::filesystem::copy(project_root_, sandbox.project,
                          std::filesystem::copy_options::recursive);
    for (const auto& [rel, text] : mutant.files)
      write_file(sandbox.project / rel, text);
    write_file(sandbox.project / kHelperModuleName, mutant.helper_module);
    write_file(sandbox.trigger, "0");
  } catch (const std::exception& e) {
    rec.invalid = true;
    rec.invalid_reason = std::string("sandbox setup failed: ") + e.what();
    fill_missing_rounds(false);
    return finish();
  }

  std::map<std::string, std::string> env = cfg_.env;
  env[kTriggerEnvVar] = sandbox.trigger.string();
  env[kCoverageEnvVar] = "";
  env[kSeedEnvVar] = std::to_string(cfg_.seed);
  {
    std::string pythonpath = sandbox.project.string();
    auto user = cfg_.env.find("PYTHONPATH");
    if (user != cfg_.env.end() && !user->second.empty())
      pythonpath += ":" + user->second;
    else if (const char* pp = std::getenv("PYTHONPATH"); pp && *pp)
      pythonpath += ":" + std::string(pp);
    env["PYTHONPATH"] = pythonpath;
  }

  auto deadline = deadline_after(cfg_.experiment_timeout_s);

  // Setup commands: failure means the experiment is INVALID, not a
  // failure mode.
  for (const auto& argv : cfg_.setup_commands) {
    SpawnSpec spec;
    spec.argv = argv;
    spec.cwd = sandbox.project.string();
    spec.env = env;
    spec.stdout_path = (sandbox.dir / "setup.out").string();
    spec.stderr_path = (sandbox.dir / "setup.err").string();
    ExitStatus st;
    try {
      st = run_command(spec, deadline);
    } catch (const std::exception& e) {
      rec.invalid = true;
      rec.invalid_reason = std::string("setup spawn failed: ") + e.what();
      fill_missing_rounds(false);
      return finish();
    }
    if (st.timed_out) {
      fill_missing_rounds(true);
      return finish();
    }
    if (!st.ok()) {
      rec.invalid = true;
      rec.invalid_reason =
          "setup command failed with exit " + std::to_string(exit_code_of(st));
      fill_missing_rounds(false);
      return finish();
    }
  }

  std::filesystem::path target_out = sandbox.dir / "target.out";
  std::filesystem::path target_err = sandbox.dir / "target.err";
  if (!cfg_.target_command.empty()) {
    SpawnSpec spec;
    spec.argv = cfg_.target_command;
    spec.cwd = sandbox.project.string();
    spec.env = env;
    spec.stdout_path = target_out.string();
    spec.stderr_path = target_err.string();
    try {
      sandbox.target = spawn(spec);
    } catch (const std::exception& e) {
      rec.invalid = true;
      rec.invalid_reason = std::string("target spawn failed: ") + e.what();
      fill_missing_rounds(false);
      return finish();
    }

    // Readiness: poll the configured command, default fixed 1 s delay.
    if (cfg_.readiness_command.empty()) {
      std::this_thread::sleep_for(std::chrono::seconds(1));
    } else {
      auto ready_deadline = deadline_after(cfg_.readiness_timeout_s);
      bool ready = false;
      while (std::chrono::steady_clock::now() <
             std::min(ready_deadline, deadline)) {
        SpawnSpec probe;
        probe.argv = cfg_.readiness_command;
        probe.cwd = sandbox.project.string();
        probe.env = env;
        probe.stdout_path = "/dev/null";
        probe.stderr_path = "/dev/null";
        try {
          if (run_command(probe, deadline).ok()) {
            ready = true;
            break;
          }
        } catch (const std::exception&) {
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      if (!ready) {
        // The target starts fault-disabled, so this is a configuration
        // problem rather than an injected failure.
        rec.invalid = true;
        rec.invalid_reason = "target did not become ready";
        fill_missing_rounds(false);
        return finish();
      }
    }
  }

  bool timed_out = false;
  for (int round = 1; round <= round_count && !timed_out; ++round) {
    RoundRecord rr;
    rr.ran = true;
    write_file(sandbox.trigger, round == 1 ? "1" : "0");

    std::filesystem::path round_dir =
        results / ("round" + std::to_string(round));
    std::filesystem::create_directories(round_dir);
    std::filesystem::path wl_out = round_dir / "workload.out";
    std::filesystem::path wl_err = round_dir / "workload.err";
    size_t target_out_mark = file_size_or_zero(target_out);
    size_t target_err_mark = file_size_or_zero(target_err);

    for (const auto& argv : cfg_.workload_commands) {
      SpawnSpec spec;
      spec.argv = argv;
      spec.cwd = sandbox.project.string();
      spec.env = env;
      spec.stdout_path = wl_out.string();
      spec.stderr_path = wl_err.string();
      ExitStatus st;
      try {
        st = run_command(spec, deadline);
      } catch (const std::exception& e) {
        rr.workload_exit_codes.push_back(127);
        write_file(wl_err, std::string("spawn failed: ") + e.what() + "\n");
        continue;
      }
      if (st.timed_out) {
        rr.timed_out = true;
        rr.workload_exit_codes.push_back(-1);
        timed_out = true;
        break;
      }
      rr.workload_exit_codes.push_back(exit_code_of(st));
    }

    rr.target_alive_at_end =
        sandbox.target.has_value() && sandbox.target->alive();
    rr.workload_stdout = read_file_or_empty(wl_out);
    rr.workload_stderr = read_file_or_empty(wl_err);
    rr.target_stdout = slice_file(target_out, target_out_mark);
    rr.target_stderr = slice_file(target_err, target_err_mark);
    write_file(round_dir / "target.out", rr.target_stdout);
    write_file(round_dir / "target.err", rr.target_stderr);

    for (const std::string& glob : cfg_.log_globs) {
      for (auto it = std::filesystem::recursive_directory_iterator(
               sandbox.project);
           it != std::filesystem::recursive_directory_iterator(); ++it) {
        if (!it->is_regular_file()) continue;
        std::string rel =
            std::filesystem::relative(it->path(), sandbox.project)
                .generic_string();
        if (!path_glob_match(glob, rel)) continue;
        std::string name = rel;
        std::replace(name.begin(), name.end(), '/', '_');
        std::string content = read_file_or_empty(it->path());
        rr.collected_logs[name] = content;
        write_file(round_dir / "logs" / name, content);
      }
    }
    rec.rounds.push_back(std::move(rr));
  }
  fill_missing_rounds(timed_out);
  return finish();
}

std::vector<ExperimentRecord> Executor::run_campaign(
    const InjectionPlan& plan, const std::vector<MutantSource>& mutants,
    int parallel_override) {
  if (plan.points.size() != mutants.size())
    throw std::invalid_argument("one mutant per plan point required");
  std::vector<ExperimentRecord> results(plan.points.size());
  if (plan.points.empty()) return results;

  int workers = std::min<int>(effective_parallelism(parallel_override),
                              static_cast<int>(plan.points.size()));
  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= plan.points.size()) return;
      wait_for_utilization_headroom();
      try {
        results[i] = run_experiment(plan.points[i], mutants[i]);
      } catch (const std::exception& e) {
        ExperimentRecord rec;
        rec.point_id = plan.points[i].id;
        rec.invalid = true;
        rec.invalid_reason = std::string("executor error: ") + e.what();
        save_record(rec, results_dir_);
        results[i] = std::move(rec);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

std::set<std::string> Executor::run_fault_free(
    const MutantSource& coverage_build) {
  Sandbox sandbox;
  sandbox.dir = sandbox_root() /
                ("faultinj-sbx-" + std::to_string(::getpid()) + "-" +
                 std::to_string(g_sandbox_seq.fetch_add(1)) + "-coverage");
  sandbox.project = sandbox.dir / "project";
  sandbox.trigger = sandbox.dir / "trigger.flag";
  sandbox.counter = &active_;
  active_.fetch_add(1);

  std::filesystem::create_directories(sandbox.project);
  std::filesystem::copy(project_root_, sandbox.project,
                        std::filesystem::copy_options::recursive);
  for (const auto& [rel, text] : coverage_build.files)
    write_file(sandbox.project / rel, text);
  write_file(sandbox.project / kHelperModuleName,
             coverage_build.helper_module);
  write_file(sandbox.trigger, "0");
  std::filesystem::path coverage_file = sandbox.dir / "coverage.log";

  std::map<std::string, std::string> env = cfg_.env;
  env[kTriggerEnvVar] = sandbox.trigger.string();
  env[kCoverageEnvVar] = coverage_file.string();
  env[kSeedEnvVar] = std::to_string(cfg_.seed);
  env["PYTHONPATH"] = sandbox.project.string();

  auto deadline = deadline_after(cfg_.experiment_timeout_s);
  for (const auto& argv : cfg_.setup_commands) {
    SpawnSpec spec;
    spec.argv = argv;
    spec.cwd = sandbox.project.string();
    spec.env = env;
    spec.stdout_path = (sandbox.dir / "setup.out").string();
    spec.stderr_path = (sandbox.dir / "setup.err").string();
    if (!run_command(spec, deadline).ok())
      throw std::runtime_error(
          "fault-free baseline: setup command failed; fix the campaign "
          "configuration");
  }
  if (!cfg_.target_command.empty()) {
    SpawnSpec spec;
    spec.argv = cfg_.target_command;
    spec.cwd = sandbox.project.string();
    spec.env = env;
    spec.stdout_path = (sandbox.dir / "target.out").string();
    spec.stderr_path = (sandbox.dir / "target.err").string();
    sandbox.target = spawn(spec);
    if (cfg_.readiness_command.empty()) {
      std::this_thread::sleep_for(std::chrono::seconds(1));
    } else {
      auto ready_deadline = deadline_after(cfg_.readiness_timeout_s);
      bool ready = false;
      while (std::chrono::steady_clock::now() < ready_deadline) {
        SpawnSpec probe;
        probe.argv = cfg_.readiness_command;
        probe.cwd = sandbox.project.string();
        probe.env = env;
        probe.stdout_path = "/dev/null";
        probe.stderr_path = "/dev/null";
        if (run_command(probe, deadline).ok()) {
          ready = true;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      if (!ready)
        throw std::runtime_error(
            "fault-free baseline: target did not become ready");
    }
  }

  for (const auto& argv : cfg_.workload_commands) {
    SpawnSpec spec;
    spec.argv = argv;
    spec.cwd = sandbox.project.string();
    spec.env = env;
    spec.stdout_path = (sandbox.dir / "workload.out").string();
    spec.stderr_path = (sandbox.dir / "workload.err").string();
    ExitStatus st = run_command(spec, deadline);
    if (!st.ok()) {
      std::string err = read_file_or_empty(sandbox.dir / "workload.err");
      throw std::runtime_error(
          "fault-free baseline workload failed (exit " +
          std::to_string(exit_code_of(st)) + "); the baseline must pass. " +
          (err.empty() ? "" : "stderr: " + err.substr(0, 400)));
    }
  }

  std::set<std::string> covered;
  std::string marker = std::string(kCoverageMarker) + " ";
  for (const std::string& line :
       split_lines(read_file_or_empty(coverage_file))) {
    if (line.rfind(marker, 0) == 0) covered.insert(line.substr(marker.size()));
  }
  return covered;
}

InjectionPlan reduce_plan(const InjectionPlan& plan,
                          const std::set<std::string>& covered) {
  InjectionPlan reduced;
  reduced.format_version = plan.format_version;
  reduced.project_fingerprint = plan.project_fingerprint;
  std::set<std::string> plan_ids;
  for (const auto& p : plan.points) plan_ids.insert(p.id);
  size_t stale = 0;
  for (const auto& id : covered)
    if (plan_ids.count(id) == 0) ++stale;
  for (const auto& p : plan.points)
    if (covered.count(p.id) > 0) reduced.points.push_back(p);
  std::ostringstream note;
  note << plan.selection_note << "; reduced to covered "
       << reduced.points.size() << "/" << plan.points.size();
  if (stale > 0) note << " (warning: " << stale << " stale covered ids ignored)";
  reduced.selection_note = note.str();
  return reduced;
}

ContainerPlan make_container_plan(const CampaignConfig& cfg,
                                  const std::string& point_id,
                                  const std::filesystem::path& staged_project) {
  ContainerPlan plan;
  plan.image_tag = "faultinj/exp:" + point_id;
  plan.container_name = "faultinj-" + point_id;
  plan.setup.push_back({"docker", "build", "-t", plan.image_tag, "-f",
                        cfg.sandbox.image_build_file,
                        staged_project.string()});
  plan.setup.push_back({"docker", "run", "-d", "--name", plan.container_name,
                        plan.image_tag, "sleep", "infinity"});
  plan.setup.push_back({"docker", "cp", staged_project.string() + "/.",
                        plan.container_name + ":/project"});
  plan.teardown.push_back({"docker", "rm", "-f", plan.container_name});
  return plan;
}

}  // namespace faultinj
