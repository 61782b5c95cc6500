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

#ifndef FAULTINJ_TESTS_SUPPORT_TEST_UTIL_HPP_
#define FAULTINJ_TESTS_SUPPORT_TEST_UTIL_HPP_

#include <filesystem>
#include <random>
#include <string>

#include "faultinj/subprocess.hpp"
#include "faultinj/util.hpp"

namespace faultinj::testing {

inline std::filesystem::path fixtures_dir() { return FAULTINJ_FIXTURES_DIR; }
inline std::filesystem::path faultmodels_dir() {
  return FAULTINJ_FAULTMODELS_DIR;
}
inline std::string cli_path() { return FAULTINJ_CLI_PATH; }

class TempDir {
 public:
  explicit TempDir(const std::string& label) {
    std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("faultinj-test-" + label + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Runs python3 with `-c code`; returns stdout. Fails the build
// environment check loudly if python3 is missing.
inline std::string run_python(const std::string& code,
                              const std::map<std::string, std::string>& env =
                                  {},
                              int* exit_code = nullptr,
                              const std::string& cwd = "") {
  TempDir dir("py");
  SpawnSpec spec;
  spec.argv = {"python3", "-c", code};
  spec.env = env;
  spec.cwd = cwd;
  spec.stdout_path = (dir.path() / "out").string();
  spec.stderr_path = (dir.path() / "err").string();
  ExitStatus st = run_command(
      spec, std::chrono::steady_clock::now() + std::chrono::seconds(60));
  if (exit_code != nullptr)
    *exit_code = st.signaled ? 128 + st.term_signal : st.exit_code;
  return read_file(dir.path() / "out");
}

// Copies a directory tree (fixture -> temp workspace).
inline void copy_tree(const std::filesystem::path& from,
                      const std::filesystem::path& to) {
  std::filesystem::create_directories(to);
  std::filesystem::copy(from, to,
                        std::filesystem::copy_options::recursive |
                            std::filesystem::copy_options::overwrite_existing);
}

}  // namespace faultinj::testing

#endif  // FAULTINJ_TESTS_SUPPORT_TEST_UTIL_HPP_
