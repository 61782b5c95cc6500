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

#include "faultinj/util.hpp"

#include <fstream>
#include <sstream>

namespace faultinj {

std::string ParseError::format(const std::string& message, SourcePos pos) {
  if (pos.line <= 0) return message;
  std::ostringstream os;
  os << "line " << pos.line << ", col " << pos.col << ": " << message;
  return os.str();
}

uint64_t fnv1a64(std::string_view data) {
  return fnv1a64_mix(1469598103934665603ull, data);
}

uint64_t fnv1a64_mix(uint64_t seed, std::string_view data) {
  uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

bool glob_match(std::string_view pattern, std::string_view name) {
  size_t p = 0, n = 0;
  size_t star = std::string_view::npos, star_n = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      star_n = n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++star_n;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

namespace {

bool path_glob_match_impl(std::string_view pat, std::string_view path) {
  if (pat.empty()) return path.empty();
  if (pat.substr(0, 3) == "**/") {
    // Zero or more leading directories.
    if (path_glob_match_impl(pat.substr(3), path)) return true;
    size_t slash = path.find('/');
    while (slash != std::string_view::npos) {
      if (path_glob_match_impl(pat.substr(3), path.substr(slash + 1)))
        return true;
      slash = path.find('/', slash + 1);
    }
    return false;
  }
  if (pat[0] == '*') {
    for (size_t take = 0; take <= path.size(); ++take) {
      if (take > 0 && path[take - 1] == '/') break;
      if (path_glob_match_impl(pat.substr(1), path.substr(take))) return true;
    }
    return false;
  }
  if (path.empty() || pat[0] != path[0]) return false;
  return path_glob_match_impl(pat.substr(1), path.substr(1));
}

}  // namespace

bool path_glob_match(std::string_view pattern, std::string_view path) {
  return path_glob_match_impl(pattern, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  size_t start = 0;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n') {
      lines.emplace_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  if (start < text.size()) lines.emplace_back(text.substr(start));
  return lines;
}

}  // namespace faultinj
