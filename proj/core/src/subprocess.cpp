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

#include "faultinj/subprocess.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <thread>

extern char** environ;

namespace faultinj {

namespace {

ExitStatus decode(int status) {
  ExitStatus st;
  if (WIFEXITED(status)) {
    st.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    st.signaled = true;
    st.term_signal = WTERMSIG(status);
  }
  return st;
}

}  // namespace

bool ChildProcess::alive() {
  if (reaped_) return false;
  if (pid_ <= 0) return false;
  int status = 0;
  pid_t r = ::waitpid(pid_, &status, WNOHANG);
  if (r == pid_) {
    reaped_ = decode(status);
    return false;
  }
  return r == 0;
}

ExitStatus ChildProcess::wait_until(
    std::chrono::steady_clock::time_point deadline) {
  if (reaped_) return *reaped_;
  if (pid_ <= 0) throw std::logic_error("wait on invalid child");
  for (;;) {
    int status = 0;
    pid_t r = ::waitpid(pid_, &status, WNOHANG);
    if (r == pid_) {
      reaped_ = decode(status);
      return *reaped_;
    }
    if (r < 0 && errno != EINTR) {
      throw std::runtime_error(std::string("waitpid: ") + strerror(errno));
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      ::killpg(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      ExitStatus st = decode(status);
      st.timed_out = true;
      reaped_ = st;
      return st;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

ExitStatus ChildProcess::wait() {
  return wait_until(std::chrono::steady_clock::time_point::max());
}

void ChildProcess::kill_group() {
  if (reaped_ || pid_ <= 0) return;
  ::killpg(pid_, SIGKILL);
  int status = 0;
  ::waitpid(pid_, &status, 0);
  ExitStatus st = decode(status);
  st.timed_out = true;
  reaped_ = st;
}

ChildProcess spawn(const SpawnSpec& spec) {
  if (spec.argv.empty()) throw std::invalid_argument("empty argv");

  std::vector<std::string> env_storage;
  for (char** e = environ; *e != nullptr; ++e) {
    std::string_view entry(*e);
    size_t eq = entry.find('=');
    std::string key(entry.substr(0, eq));
    if (spec.env.count(key) == 0) env_storage.emplace_back(entry);
  }
  for (const auto& [k, v] : spec.env) env_storage.push_back(k + "=" + v);

  std::vector<char*> argv_ptrs;
  for (const auto& a : spec.argv)
    argv_ptrs.push_back(const_cast<char*>(a.c_str()));
  argv_ptrs.push_back(nullptr);
  std::vector<char*> env_ptrs;
  for (const auto& e : env_storage)
    env_ptrs.push_back(const_cast<char*>(e.c_str()));
  env_ptrs.push_back(nullptr);

  int err_pipe[2];
  if (::pipe2(err_pipe, O_CLOEXEC) != 0)
    throw std::runtime_error("pipe2 failed");

  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(err_pipe[0]);
    ::close(err_pipe[1]);
    throw std::runtime_error("fork failed");
  }

  if (pid == 0) {
    // Child. Only async-signal-safe calls from here on.
    ::close(err_pipe[0]);
    if (spec.new_group) ::setpgid(0, 0);
    if (!spec.cwd.empty() && ::chdir(spec.cwd.c_str()) != 0) {
      int e = errno;
      (void)!::write(err_pipe[1], &e, sizeof(e));
      ::_exit(127);
    }
    auto redirect = [&](const std::string& path, int fd) {
      if (path.empty()) return true;
      int f = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
      if (f < 0) return false;
      ::dup2(f, fd);
      ::close(f);
      return true;
    };
    if (!redirect(spec.stdout_path, STDOUT_FILENO) ||
        !redirect(spec.stderr_path, STDERR_FILENO)) {
      int e = errno;
      (void)!::write(err_pipe[1], &e, sizeof(e));
      ::_exit(127);
    }
    ::execvpe(spec.argv[0].c_str(), argv_ptrs.data(), env_ptrs.data());
    int e = errno;
    (void)!::write(err_pipe[1], &e, sizeof(e));
    ::_exit(127);
  }

  ::close(err_pipe[1]);
  int child_errno = 0;
  ssize_t n = ::read(err_pipe[0], &child_errno, sizeof(child_errno));
  ::close(err_pipe[0]);
  if (n > 0) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    throw std::runtime_error("cannot exec '" + spec.argv[0] +
                             "': " + strerror(child_errno));
  }
  return ChildProcess(pid);
}

ExitStatus run_command(const SpawnSpec& spec,
                       std::chrono::steady_clock::time_point deadline) {
  ChildProcess child = spawn(spec);
  return child.wait_until(deadline);
}

}  // namespace faultinj
