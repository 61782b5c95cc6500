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

#ifndef FAULTINJ_CODE_MODEL_HPP_
#define FAULTINJ_CODE_MODEL_HPP_

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "faultinj/py_lexer.hpp"
#include "faultinj/util.hpp"

namespace faultinj {

// The tree keeps every statement's exact token span so mutants can splice
// replacement text while leaving untouched bytes identical. Statement
// structure is modeled fully; expression structure is modeled for the
// constructs that participate in matching (calls, names, attribute
// chains, string literals) and kept as opaque token runs otherwise.
enum class NodeKind {
  kModule,
  kBlock,        // statement sequence (module body or a suite)
  kClause,       // one `header: suite` arm of a compound statement
  kFunctionDef,
  kClassDef,
  kIf,
  kLoop,         // for / while
  kTry,
  kWith,
  kOtherCompound,  // match/case and anything else shaped `header: suite`
  kStatement,      // simple statement led by a keyword (return, raise, ...)
  kAssignment,     // simple statement with a top-level (augmented) `=`
  kExpressionStmt,
  kCall,
  kArgument,
  kName,
  kAttribute,
  kStringLiteral,
  kNumberLiteral,
  kOpaqueExpr,
};

struct Node;
using NodeUp = std::unique_ptr<Node>;

struct Node {
  NodeKind kind = NodeKind::kOpaqueExpr;
  // Token span [begin, end) into the owning tree's token vector. Always
  // set for nodes parsed from source; covers the whole construct
  // (decorators included for defs).
  const Token* tok_begin = nullptr;
  const Token* tok_end = nullptr;
  std::vector<NodeUp> children;

  // kFunctionDef/kClassDef: definition name. kName: identifier.
  // kAttribute: attribute name. kCall: dotted callee name, empty when the
  // callee is not a plain name/attribute chain. kArgument: keyword name.
  // kClause: clause keyword ("if", "elif", "else", "for", ...).
  // kStatement: leading keyword.
  std::string name;
  std::string str_value;    // kStringLiteral: decoded value
  std::string arg_prefix;   // kArgument: "", "*" or "**"
  int header_end = -1;      // kClause: index of ':' within [begin,end)

  bool is_simple_statement() const {
    return kind == NodeKind::kStatement || kind == NodeKind::kAssignment ||
           kind == NodeKind::kExpressionStmt;
  }
  bool is_compound_statement() const {
    return kind == NodeKind::kFunctionDef || kind == NodeKind::kClassDef ||
           kind == NodeKind::kIf || kind == NodeKind::kLoop ||
           kind == NodeKind::kTry || kind == NodeKind::kWith ||
           kind == NodeKind::kOtherCompound;
  }
  bool is_statement() const {
    return is_simple_statement() || is_compound_statement();
  }

  size_t start_offset() const { return tok_begin->offset; }
  size_t end_offset() const { return (tok_end - 1)->end_offset(); }
  int start_line() const { return tok_begin->pos.line; }
  int end_line() const;
};

class ProgramTree {
 public:
  ProgramTree(std::string path, std::string source);
  ProgramTree(ProgramTree&&) = default;
  ProgramTree& operator=(ProgramTree&&) = default;

  const std::string& path() const { return path_; }
  std::string_view source() const { return *source_; }
  const std::vector<Token>& tokens() const { return tokens_; }
  const Node& root() const { return *root_; }

 private:
  friend ProgramTree parse_source(std::string_view, std::string);
  std::string path_;
  std::unique_ptr<std::string> source_;  // stable address; tokens view into it
  std::vector<Token> tokens_;
  NodeUp root_;
};

// Parses Python 3 source. Throws ParseError with a position on malformed
// input; callers scanning whole projects catch per file.
ProgramTree parse_source(std::string_view text, std::string path);

// Formatting-, comment- and position-insensitive equality. String
// literals compare by decoded value, names by identifier text.
bool structural_equal(const Node& a, const Node& b);

struct BlockRef {
  const Node* owner;  // module or the enclosing clause
  const Node* block;
};

// Every statement sequence in the tree, in document order: module body
// first, then each suite as encountered.
std::vector<BlockRef> enumerate_blocks(const ProgramTree& tree);

// Leading module statements that code movement must not disturb: the
// module docstring and `from __future__` imports. Matching windows and
// injected imports start below them.
int module_prologue_length(const ProgramTree& tree);

// Identity for unmodified trees: the original bytes.
std::string render_source(const ProgramTree& tree);

// Canonical one-line rendering of a token run (single spaces, bracket- and
// dot-tight). Used when synthesizing replacement code.
std::string render_tokens(const Token* begin, const Token* end);

// --- Light expression parsing ------------------------------------------
//
// Parses the token range [begin, end) as one expression. Produces a
// kCall / kName / kAttribute / kStringLiteral / kNumberLiteral node when
// the range is exactly that construct, else kOpaqueExpr spanning the
// range. Returns nullptr for an empty range.
NodeUp parse_expression_range(const Token* begin, const Token* end);

// Skips one balanced primary expression starting at `begin` (atom plus
// trailers). Returns the end pointer, or nullptr if no primary starts
// there. Used for matching call-shaped holes mid-statement.
const Token* skip_primary(const Token* begin, const Token* end);

}  // namespace faultinj

#endif  // FAULTINJ_CODE_MODEL_HPP_
