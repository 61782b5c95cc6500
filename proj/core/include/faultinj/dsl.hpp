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

#ifndef FAULTINJ_DSL_HPP_
#define FAULTINJ_DSL_HPP_

#include <climits>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "faultinj/code_model.hpp"
#include "faultinj/py_lexer.hpp"
#include "faultinj/util.hpp"

namespace faultinj {

// A bug specification is `change { pattern } into { replacement }`.
// Pattern and replacement are sequences of statement-position elements:
// directives and Python fragments, where fragments may embed directives
// at expression positions and brace-delimited suites after compound
// headers, e.g.  `if $EXPR#e : { $BLOCK{max=4} continue }`.
enum class DirectiveKind {
  kCall,     // $CALL{name=glob}(...)         pattern side
  kBlock,    // $BLOCK{tag=,min=,max=}        pattern side
  kExpr,     // $EXPR#tag                     pattern side
  kString,   // $STRING{contains=,match=}     pattern side
  kCorrupt,  // $CORRUPT{mode=,seed=}(x)      replacement side
  kHog,      // $HOG{resource=cpu,threads=}   replacement side
  kTimeout,  // $TIMEOUT{ms=}                 replacement side
  kTagRef,   // #name                         replacement side
};

const char* directive_name(DirectiveKind kind);

struct PatternElement;

struct DirectiveSpec {
  DirectiveKind kind = DirectiveKind::kTagRef;
  std::vector<std::pair<std::string, std::string>> attrs;  // raw, in order
  std::string tag;
  enum class ArgMode { kNone, kAnyArity, kList };
  ArgMode arg_mode = ArgMode::kNone;
  std::vector<PatternElement> args;  // one element per argument
  SourcePos pos;

  // Normalized forms, populated by compile_spec.
  std::string name_glob;                 // kCall
  int min = 1;                           // kBlock
  int max = INT_MAX;                     // kBlock
  std::string contains;                  // kString
  std::shared_ptr<const std::regex> match_regex;  // kString {match=...}
  std::string corrupt_mode = "random";   // kCorrupt
  std::optional<long> seed;              // kCorrupt
  int threads = 1;                       // kHog
  long ms = 0;                           // kTimeout

  std::string attr(const std::string& key) const;
  bool has_attr(const std::string& key) const;
};

// One token of a literal fragment, or an embedded directive hole.
struct FragmentPiece {
  bool is_hole = false;
  Token token;                              // !is_hole
  std::shared_ptr<DirectiveSpec> hole;      // is_hole
};

struct ClausePattern;

struct PatternElement {
  enum class Kind { kLiteral, kDirective };
  Kind kind = Kind::kLiteral;
  std::shared_ptr<DirectiveSpec> directive;  // kDirective

  // kLiteral, simple statement or expression fragment.
  std::vector<FragmentPiece> pieces;
  // kLiteral, compound statement fragment.
  bool compound = false;
  std::vector<ClausePattern> clauses;

  // Set by compile_spec for simple literal fragments: the statement kind
  // the fragment parses to with holes substituted by placeholders.
  NodeKind stmt_kind = NodeKind::kOpaqueExpr;

  SourcePos pos;
};

struct ClausePattern {
  std::string keyword;
  std::vector<FragmentPiece> header;  // up to and including the ':'
  std::vector<PatternElement> body;
};

struct BugSpec {
  std::string name;
  std::shared_ptr<const std::string> source_text;
  std::vector<PatternElement> pattern;
  std::vector<PatternElement> replacement;
};

struct MetaModel {
  std::string spec_name;
  std::shared_ptr<const std::string> source_text;  // keeps token views alive
  std::vector<PatternElement> pattern_tree;
  std::vector<PatternElement> replacement_template;
  std::map<std::string, DirectiveKind> tag_table;
};

// Throws ParseError on syntax errors, unknown directives, malformed or
// unknown attributes, and empty patterns.
BugSpec parse_spec(std::string_view text, std::string name);

// Non-throwing invariant checks: unbound replacement tags, duplicate
// pattern tags, directives on the wrong side, ambiguous untagged
// references. Empty result means the spec is well formed.
std::vector<Diagnostic> validate_spec(const BugSpec& spec);

// Requires validate_spec(spec) to be empty. Normalizes directive
// attributes and verifies every literal fragment parses as Python with
// holes substituted by placeholder names. Throws ParseError.
MetaModel compile_spec(const BugSpec& spec);

// Canonical text form; parse_spec(render_spec(s)) is structurally equal
// to s.
std::string render_spec(const BugSpec& spec);

// Deterministic dump used for byte-equality checks and debugging.
std::string serialize_meta_model(const MetaModel& model);

struct FaultModelFile {
  int format_version = 1;
  std::vector<BugSpec> specs;
};

// JSON: { "format_version": 1, "specs": [ { "name": ..., "text": ... } ] }.
// Spec text is embedded verbatim; load re-parses it. Schema violations
// raise std::runtime_error naming the offending JSON path.
FaultModelFile load_fault_model(const std::filesystem::path& path);
void save_fault_model(const FaultModelFile& model,
                      const std::filesystem::path& path);

}  // namespace faultinj

#endif  // FAULTINJ_DSL_HPP_
