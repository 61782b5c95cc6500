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

#ifndef FAULTINJ_SUBPROCESS_HPP_
#define FAULTINJ_SUBPROCESS_HPP_

#include <sys/types.h>

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace faultinj {

struct SpawnSpec {
  std::vector<std::string> argv;
  std::string cwd;  // empty: inherit
  std::map<std::string, std::string> env;  // overrides on top of parent env
  std::string stdout_path;  // empty: inherit
  std::string stderr_path;
  // Children are placed in their own process group so a timeout can kill
  // the whole tree (workers a target forks included).
  bool new_group = true;
};

struct ExitStatus {
  int exit_code = -1;      // valid when !signaled
  bool signaled = false;
  int term_signal = 0;
  bool timed_out = false;  // killed by wait_deadline

  bool ok() const { return !signaled && !timed_out && exit_code == 0; }
};

class ChildProcess {
 public:
  ChildProcess() = default;
  explicit ChildProcess(pid_t pid) : pid_(pid) {}

  pid_t pid() const { return pid_; }
  bool valid() const { return pid_ > 0; }

  // Non-blocking liveness check; reaps if the child just exited.
  bool alive();

  // Waits until the deadline; on expiry kills the process group and
  // reports timed_out. Always reaps.
  ExitStatus wait_until(std::chrono::steady_clock::time_point deadline);
  ExitStatus wait();

  // SIGKILL to the whole group, then reap.
  void kill_group();

 private:
  pid_t pid_ = -1;
  std::optional<ExitStatus> reaped_;
};

// Throws std::runtime_error if the executable cannot be spawned.
ChildProcess spawn(const SpawnSpec& spec);

// Convenience: spawn and wait with a deadline.
ExitStatus run_command(const SpawnSpec& spec,
                       std::chrono::steady_clock::time_point deadline);

}  // namespace faultinj

#endif  // FAULTINJ_SUBPROCESS_HPP_
