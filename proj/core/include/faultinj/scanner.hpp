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

#ifndef FAULTINJ_SCANNER_HPP_
#define FAULTINJ_SCANNER_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "faultinj/code_model.hpp"
#include "faultinj/dsl.hpp"

namespace faultinj {

// What a pattern tag matched. Statement-position tags (blocks, calls at
// statement level) carry a statement range; expression-position tags
// carry a token range. Valid only while the scanned tree is alive.
struct TagBinding {
  DirectiveKind kind = DirectiveKind::kBlock;
  const Node* block = nullptr;  // enclosing block for statement ranges
  int stmt_first = 0;
  int stmt_last = 0;  // [stmt_first, stmt_last)
  const Token* tok_begin = nullptr;  // expression bindings
  const Token* tok_end = nullptr;
  std::shared_ptr<const Node> call_detail;  // kCall: parsed call structure
  std::string string_value;                 // kString: decoded value
};

struct Match {
  std::string file;
  const Node* block = nullptr;
  int block_index = 0;  // position of `block` in enumerate_blocks order
  int first = 0;        // statement window [first, last) within block
  int last = 0;
  std::map<std::string, TagBinding> bindings;
  std::string spec_name;

  int line_start() const { return block->children[first]->start_line(); }
  int line_end() const { return block->children[last - 1]->end_line(); }
};

// Window semantics: a pattern matches a contiguous statement window
// inside one block. $BLOCK elements adjacent to the pattern boundary
// absorb the maximal span their bounds allow; $BLOCK elements between
// concrete anchors take exactly the gap the anchor positions leave,
// split lexicographically-minimal when several blocks share a gap.
// Every feasible anchor assignment yields a match; matches with an
// identical window are deduplicated keeping the first.
std::vector<Match> find_matches(const ProgramTree& tree,
                                const MetaModel& model);

struct InjectionPoint {
  std::string id;
  std::string file;  // path relative to the project root, '/'-separated
  int line_start = 0;
  int line_end = 0;
  std::string spec_name;
  std::string component;
};

// Longest-prefix path mapping; files with no mapping get their top-level
// directory name ("." for files at the root).
struct ComponentMap {
  std::vector<std::pair<std::string, std::string>> prefixes;
  std::string component_for(const std::string& rel_path) const;
};

struct SkipRecord {
  std::string file;
  std::string error;
};

struct ScanResult {
  std::vector<InjectionPoint> points;  // sorted (file, line, spec)
  std::vector<SkipRecord> skipped;
  std::string project_fingerprint;
};

// Scans every *.py under root against all models. Unparseable files are
// reported in `skipped`, never fatal. Files are processed in parallel;
// the merged result is deterministic.
ScanResult scan_project(const std::filesystem::path& root,
                        const std::vector<MetaModel>& models,
                        const ComponentMap& components,
                        int max_workers = 0);

// Content hash over all *.py files (sorted relative path + bytes).
std::string project_fingerprint(const std::filesystem::path& root);

struct Selection {
  enum class Mode { kAll, kFileGlob, kComponent, kSample };
  Mode mode = Mode::kAll;
  std::string argument;  // glob or component name
  size_t sample_n = 0;
  uint64_t seed = 0;
};

struct InjectionPlan {
  int format_version = 1;
  std::string project_fingerprint;
  std::string selection_note;
  std::vector<InjectionPoint> points;
};

InjectionPlan build_plan(const ScanResult& scan, const Selection& selection);

void save_plan(const InjectionPlan& plan, const std::filesystem::path& path);
InjectionPlan load_plan(const std::filesystem::path& path);

// Re-derives the Match for a plan point on a freshly parsed tree.
// Returns nullopt when the point no longer matches (stale plan).
std::optional<Match> recover_match(const ProgramTree& tree,
                                   const MetaModel& model,
                                   const InjectionPoint& point);

// Stable id: hash of file, block position, window and spec name.
std::string point_id(const std::string& file, int block_index, int first,
                     int last, const std::string& spec_name);

// Single-statement matching (anchors only, never $BLOCK). Exposed so the
// brute-force reference matcher can enumerate windows and splits
// independently while sharing leaf-level matching.
bool match_statement_pattern(const PatternElement& element, const Node& stmt,
                             std::map<std::string, TagBinding>& bindings);

}  // namespace faultinj

#endif  // FAULTINJ_SCANNER_HPP_
