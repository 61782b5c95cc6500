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

#ifndef FAULTINJ_UTIL_HPP_
#define FAULTINJ_UTIL_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace faultinj {

// 1-based line, 1-based column. Line 0 means "no position".
struct SourcePos {
  int line = 0;
  int col = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, SourcePos pos)
      : std::runtime_error(format(message, pos)), pos_(pos) {}

  SourcePos pos() const { return pos_; }

 private:
  static std::string format(const std::string& message, SourcePos pos);
  SourcePos pos_;
};

// Non-throwing validation result. `rule` names the violated invariant.
struct Diagnostic {
  std::string rule;
  std::string message;
  SourcePos pos;
};

// FNV-1a, used for injection-point ids and project fingerprints.
// Stability across runs and platforms is the requirement, not crypto.
uint64_t fnv1a64(std::string_view data);
uint64_t fnv1a64_mix(uint64_t seed, std::string_view data);
std::string to_hex(uint64_t value);

// Dotted-name glob: `*` matches any run of characters, nothing else is
// special.
bool glob_match(std::string_view pattern, std::string_view name);

// Path glob used for plan filters and log collection: `*` does not cross
// path separators, `**/` matches any directory prefix.
bool path_glob_match(std::string_view pattern, std::string_view path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace faultinj

#endif  // FAULTINJ_UTIL_HPP_
