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

#include "faultinj/code_model.hpp"

#include <algorithm>
#include <cassert>
#include <set>

namespace faultinj {

namespace {

const std::set<std::string_view> kSimpleKeywords = {
    "return", "raise",  "pass",   "break",    "continue", "import",
    "from",   "global", "nonlocal", "assert", "del",      "yield",
    "await",  "lambda", "not"};

const std::set<std::string_view> kAugAssignOps = {
    "=",  "+=", "-=",  "*=",  "/=",  "//=", "%=",
    "@=", "&=", "|=",  "^=",  ">>=", "<<=", "**="};

bool is_open(const Token& t) {
  return t.is_op("(") || t.is_op("[") || t.is_op("{");
}
bool is_close(const Token& t) {
  return t.is_op(")") || t.is_op("]") || t.is_op("}");
}

NodeKind compound_kind(std::string_view kw) {
  if (kw == "def") return NodeKind::kFunctionDef;
  if (kw == "class") return NodeKind::kClassDef;
  if (kw == "if") return NodeKind::kIf;
  if (kw == "for" || kw == "while") return NodeKind::kLoop;
  if (kw == "try") return NodeKind::kTry;
  if (kw == "with") return NodeKind::kWith;
  return NodeKind::kOtherCompound;
}

// Clause keywords that may follow a compound's first clause.
std::vector<std::string_view> continuations(std::string_view opener) {
  if (opener == "if") return {"elif", "else"};
  if (opener == "try") return {"except", "else", "finally"};
  if (opener == "for" || opener == "while") return {"else"};
  return {};
}

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

  NodeUp parse_module() {
    auto module = std::make_unique<Node>();
    module->kind = NodeKind::kModule;
    auto block = std::make_unique<Node>();
    block->kind = NodeKind::kBlock;
    while (!at(TokKind::kEnd)) {
      parse_statement_into(*block);
    }
    set_span_from_children(*block, &toks_.front(), &toks_.back() + 1);
    module->tok_begin = block->tok_begin;
    module->tok_end = block->tok_end;
    module->children.push_back(std::move(block));
    return module;
  }

 private:
  const Token& cur() const { return toks_[idx_]; }
  const Token* cur_ptr() const { return &toks_[idx_]; }
  bool at(TokKind k) const { return cur().kind == k; }
  void bump() { ++idx_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, cur().pos);
  }

  void expect_op(std::string_view text) {
    if (!cur().is_op(text)) fail("expected '" + std::string(text) + "'");
    bump();
  }

  static void set_span_from_children(Node& n, const Token* fallback_begin,
                                     const Token* fallback_end) {
    if (n.children.empty()) {
      n.tok_begin = fallback_begin;
      n.tok_end = fallback_begin;
      (void)fallback_end;
      return;
    }
    n.tok_begin = n.children.front()->tok_begin;
    n.tok_end = n.children.back()->tok_end;
  }

  // True when the current logical line contains a depth-0 ':' before its
  // NEWLINE. Used to disambiguate the soft keywords match/case.
  bool line_has_suite_colon() const {
    int depth = 0;
    bool lambda_pending = false;
    for (size_t i = idx_; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (t.kind == TokKind::kNewline || t.kind == TokKind::kEnd) return false;
      if (is_open(t)) ++depth;
      if (is_close(t)) --depth;
      if (t.kind == TokKind::kName && t.text == "lambda" && depth == 0)
        lambda_pending = true;
      if (t.is_op(":") && depth == 0) {
        if (lambda_pending) {
          lambda_pending = false;
          continue;
        }
        return true;
      }
    }
    return false;
  }

  bool starts_compound() const {
    if (cur().kind != TokKind::kName) return false;
    std::string_view w = cur().text;
    if (w == "if" || w == "while" || w == "for" || w == "try" || w == "with" ||
        w == "def" || w == "class")
      return true;
    if (w == "async") {
      const Token& nxt = toks_[idx_ + 1];
      return nxt.is_name("def") || nxt.is_name("for") || nxt.is_name("with");
    }
    if (w == "match" || w == "case") {
      // Soft keywords: compound only when the line is a `header:` shape
      // and the keyword is not an annotated name (`match: int = 5`).
      if (toks_[idx_ + 1].is_op(":")) return false;
      return line_has_suite_colon();
    }
    return false;
  }

  void parse_statement_into(Node& block) {
    if (at(TokKind::kNewline) || at(TokKind::kIndent)) {
      fail("unexpected layout token");  // lexer never produces this here
    }
    if (cur().kind == TokKind::kName &&
        (cur().text == "elif" || cur().text == "else" ||
         cur().text == "except" || cur().text == "finally")) {
      fail("'" + std::string(cur().text) + "' without matching statement");
    }
    if (cur().is_op("@")) {
      parse_decorated(block);
      return;
    }
    if (starts_compound()) {
      block.children.push_back(parse_compound(cur_ptr()));
      return;
    }
    parse_simple_line_into(block);
  }

  void parse_decorated(Node& block) {
    const Token* start = cur_ptr();
    while (cur().is_op("@")) {
      while (!at(TokKind::kNewline) && !at(TokKind::kEnd)) bump();
      if (at(TokKind::kNewline)) bump();
    }
    if (!starts_compound()) fail("expected a definition after decorators");
    block.children.push_back(parse_compound(start));
  }

  NodeUp parse_compound(const Token* span_start) {
    std::string_view kw = cur().text;
    if (kw == "async") kw = toks_[idx_ + 1].text;
    auto node = std::make_unique<Node>();
    node->kind = compound_kind(kw);
    node->tok_begin = span_start;

    node->children.push_back(parse_clause());
    for (;;) {
      bool more = false;
      for (std::string_view cont : continuations(kw)) {
        if (cur().kind == TokKind::kName && cur().text == cont) {
          node->children.push_back(parse_clause());
          more = true;
          break;
        }
      }
      if (!more) break;
    }

    if (node->kind == NodeKind::kFunctionDef ||
        node->kind == NodeKind::kClassDef) {
      // Definition name follows the def/class keyword.
      for (const Token* t = node->children[0]->tok_begin;
           t < node->children[0]->tok_end; ++t) {
        if (t->kind == TokKind::kName && (t->text == "def" || t->text == "class")) {
          if ((t + 1)->kind == TokKind::kName) node->name = (t + 1)->text;
          break;
        }
      }
    }
    node->tok_end = node->children.back()->tok_end;
    return node;
  }

  NodeUp parse_clause() {
    auto clause = std::make_unique<Node>();
    clause->kind = NodeKind::kClause;
    clause->tok_begin = cur_ptr();
    clause->name = std::string(cur().text == "async" ? toks_[idx_ + 1].text
                                                     : cur().text);
    // Header runs to the first depth-0 ':' (lambda parameter colons are
    // skipped).
    int depth = 0;
    bool lambda_pending = false;
    for (;;) {
      if (at(TokKind::kNewline) || at(TokKind::kEnd)) fail("expected ':'");
      const Token& t = cur();
      if (is_open(t)) ++depth;
      if (is_close(t)) --depth;
      if (t.kind == TokKind::kName && t.text == "lambda" && depth == 0)
        lambda_pending = true;
      if (t.is_op(":") && depth == 0) {
        if (lambda_pending) {
          lambda_pending = false;
          bump();
          continue;
        }
        clause->header_end = static_cast<int>(cur_ptr() - clause->tok_begin);
        bump();
        break;
      }
      bump();
    }

    auto body = std::make_unique<Node>();
    body->kind = NodeKind::kBlock;
    if (at(TokKind::kNewline)) {
      bump();
      if (!at(TokKind::kIndent)) fail("expected an indented block");
      bump();
      while (!at(TokKind::kDedent) && !at(TokKind::kEnd)) {
        parse_statement_into(*body);
      }
      if (at(TokKind::kDedent)) bump();
    } else {
      // Inline suite: simple statements separated by ';' up to NEWLINE.
      parse_simple_line_into(*body);
    }
    if (body->children.empty()) fail("empty suite");
    set_span_from_children(*body, clause->tok_begin, clause->tok_begin);
    clause->tok_end = body->tok_end;
    clause->children.push_back(std::move(body));
    return clause;
  }

  // One logical line of simple statements, split at top-level ';'.
  void parse_simple_line_into(Node& block) {
    const Token* piece_start = cur_ptr();
    int depth = 0;
    auto flush = [&](const Token* piece_end) {
      if (piece_start == piece_end) return;
      block.children.push_back(classify_simple(piece_start, piece_end));
    };
    for (;;) {
      if (at(TokKind::kNewline)) {
        flush(cur_ptr());
        bump();
        return;
      }
      if (at(TokKind::kEnd) || at(TokKind::kDedent)) {
        flush(cur_ptr());
        return;
      }
      if (is_open(cur())) ++depth;
      if (is_close(cur())) --depth;
      if (cur().is_op(";") && depth == 0) {
        flush(cur_ptr());
        bump();
        piece_start = cur_ptr();
        continue;
      }
      bump();
    }
  }

  NodeUp classify_simple(const Token* begin, const Token* end) {
    auto node = std::make_unique<Node>();
    node->tok_begin = begin;
    node->tok_end = end;
    if (begin->kind == TokKind::kName && is_keyword(begin->text) &&
        kSimpleKeywords.count(begin->text) > 0) {
      node->kind = NodeKind::kStatement;
      node->name = begin->text;
      return node;
    }
    int depth = 0;
    for (const Token* t = begin; t < end; ++t) {
      if (is_open(*t)) ++depth;
      if (is_close(*t)) --depth;
      if (depth == 0 && t->kind == TokKind::kOp &&
          kAugAssignOps.count(t->text) > 0) {
        node->kind = NodeKind::kAssignment;
        return node;
      }
    }
    node->kind = NodeKind::kExpressionStmt;
    if (NodeUp expr = parse_expression_range(begin, end))
      node->children.push_back(std::move(expr));
    return node;
  }

  const std::vector<Token>& toks_;
  size_t idx_ = 0;
};

const Token* skip_balanced_group(const Token* begin, const Token* end) {
  assert(is_open(*begin));
  int depth = 0;
  for (const Token* t = begin; t < end; ++t) {
    if (is_open(*t)) ++depth;
    if (is_close(*t)) {
      --depth;
      if (depth == 0) return t + 1;
    }
  }
  return nullptr;  // unbalanced
}

NodeUp make_opaque(const Token* begin, const Token* end) {
  auto n = std::make_unique<Node>();
  n->kind = NodeKind::kOpaqueExpr;
  n->tok_begin = begin;
  n->tok_end = end;
  return n;
}

// Splits [begin, end) at depth-0 commas.
std::vector<std::pair<const Token*, const Token*>> split_commas(
    const Token* begin, const Token* end) {
  std::vector<std::pair<const Token*, const Token*>> parts;
  const Token* part = begin;
  int depth = 0;
  for (const Token* t = begin; t < end; ++t) {
    if (is_open(*t)) ++depth;
    if (is_close(*t)) --depth;
    if (depth == 0 && t->is_op(",")) {
      parts.emplace_back(part, t);
      part = t + 1;
    }
  }
  parts.emplace_back(part, end);
  if (!parts.empty() && parts.back().first == parts.back().second)
    parts.pop_back();  // trailing comma
  return parts;
}

NodeUp parse_argument(const Token* begin, const Token* end) {
  auto arg = std::make_unique<Node>();
  arg->kind = NodeKind::kArgument;
  arg->tok_begin = begin;
  arg->tok_end = end;
  const Token* value_begin = begin;
  if (begin < end && (begin->is_op("*") || begin->is_op("**"))) {
    arg->arg_prefix = begin->text;
    value_begin = begin + 1;
  } else if (end - begin >= 2 && begin->kind == TokKind::kName &&
             (begin + 1)->is_op("=")) {
    arg->name = begin->text;
    value_begin = begin + 2;
  }
  if (NodeUp value = parse_expression_range(value_begin, end))
    arg->children.push_back(std::move(value));
  return arg;
}

// Dotted callee name for plain name/attribute chains, else "".
std::string dotted_name_of(const Node& expr) {
  if (expr.kind == NodeKind::kName) return expr.name;
  if (expr.kind == NodeKind::kAttribute && !expr.children.empty()) {
    std::string base = dotted_name_of(*expr.children[0]);
    if (base.empty()) return "";
    return base + "." + expr.name;
  }
  return "";
}

// Atom plus trailers. Returns nullptr when no primary starts at `begin`.
NodeUp parse_primary(const Token* begin, const Token* end,
                     const Token** out_end) {
  if (begin >= end) return nullptr;
  NodeUp node;
  const Token* t = begin;
  if (t->kind == TokKind::kName) {
    if (is_keyword(t->text) && t->text != "True" && t->text != "False" &&
        t->text != "None")
      return nullptr;
    node = std::make_unique<Node>();
    node->kind = NodeKind::kName;
    node->name = t->text;
    node->tok_begin = t;
    node->tok_end = t + 1;
    ++t;
  } else if (t->kind == TokKind::kNumber) {
    node = std::make_unique<Node>();
    node->kind = NodeKind::kNumberLiteral;
    node->tok_begin = t;
    node->tok_end = t + 1;
    ++t;
  } else if (t->kind == TokKind::kString) {
    std::string value;
    const Token* s = t;
    while (t < end && t->kind == TokKind::kString) {
      value += string_token_value(*t);
      ++t;
    }
    node = std::make_unique<Node>();
    node->kind = NodeKind::kStringLiteral;
    node->str_value = std::move(value);
    node->tok_begin = s;
    node->tok_end = t;
  } else if (is_open(*t)) {
    const Token* close = skip_balanced_group(t, end);
    if (close == nullptr) return nullptr;
    node = make_opaque(t, close);
    t = close;
  } else {
    return nullptr;
  }

  for (;;) {
    if (t < end && t->is_op(".") && t + 1 < end &&
        (t + 1)->kind == TokKind::kName) {
      auto attr = std::make_unique<Node>();
      attr->kind = NodeKind::kAttribute;
      attr->name = (t + 1)->text;
      attr->tok_begin = node->tok_begin;
      attr->tok_end = t + 2;
      attr->children.push_back(std::move(node));
      node = std::move(attr);
      t += 2;
      continue;
    }
    if (t < end && t->is_op("(")) {
      const Token* close = skip_balanced_group(t, end);
      if (close == nullptr) return nullptr;
      auto call = std::make_unique<Node>();
      call->kind = NodeKind::kCall;
      call->name = dotted_name_of(*node);
      call->tok_begin = node->tok_begin;
      call->tok_end = close;
      call->children.push_back(std::move(node));
      for (auto [ab, ae] : split_commas(t + 1, close - 1))
        call->children.push_back(parse_argument(ab, ae));
      node = std::move(call);
      t = close;
      continue;
    }
    if (t < end && t->is_op("[")) {
      const Token* close = skip_balanced_group(t, end);
      if (close == nullptr) return nullptr;
      auto sub = make_opaque(node->tok_begin, close);
      node = std::move(sub);
      t = close;
      continue;
    }
    break;
  }
  *out_end = t;
  return node;
}

}  // namespace

int Node::end_line() const {
  const Token& last = *(tok_end - 1);
  int line = last.pos.line;
  for (char c : last.text)
    if (c == '\n') ++line;
  return line;
}

ProgramTree::ProgramTree(std::string path, std::string source)
    : path_(std::move(path)),
      source_(std::make_unique<std::string>(std::move(source))) {}

ProgramTree parse_source(std::string_view text, std::string path) {
  ProgramTree tree(std::move(path), std::string(text));
  tree.tokens_ = lex(*tree.source_);
  Parser parser(tree.tokens_);
  tree.root_ = parser.parse_module();
  return tree;
}

NodeUp parse_expression_range(const Token* begin, const Token* end) {
  if (begin >= end) return nullptr;
  const Token* consumed = nullptr;
  if (NodeUp n = parse_primary(begin, end, &consumed)) {
    if (consumed == end) return n;
  }
  return make_opaque(begin, end);
}

const Token* skip_primary(const Token* begin, const Token* end) {
  const Token* consumed = nullptr;
  NodeUp n = parse_primary(begin, end, &consumed);
  return n ? consumed : nullptr;
}

namespace {

bool token_equal(const Token& a, const Token& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == TokKind::kString)
    return string_token_value(a) == string_token_value(b);
  return a.text == b.text;
}

bool token_range_equal(const Token* ab, const Token* ae, const Token* bb,
                       const Token* be) {
  if (ae - ab != be - bb) return false;
  for (; ab < ae; ++ab, ++bb)
    if (!token_equal(*ab, *bb)) return false;
  return true;
}

}  // namespace

bool structural_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case NodeKind::kModule:
    case NodeKind::kBlock: {
      if (a.children.size() != b.children.size()) return false;
      for (size_t i = 0; i < a.children.size(); ++i)
        if (!structural_equal(*a.children[i], *b.children[i])) return false;
      return true;
    }
    case NodeKind::kClause: {
      if (a.name != b.name) return false;
      if (!token_range_equal(a.tok_begin, a.tok_begin + a.header_end + 1,
                             b.tok_begin, b.tok_begin + b.header_end + 1))
        return false;
      return structural_equal(*a.children[0], *b.children[0]);
    }
    case NodeKind::kFunctionDef:
    case NodeKind::kClassDef:
    case NodeKind::kIf:
    case NodeKind::kLoop:
    case NodeKind::kTry:
    case NodeKind::kWith:
    case NodeKind::kOtherCompound: {
      if (a.children.size() != b.children.size()) return false;
      for (size_t i = 0; i < a.children.size(); ++i)
        if (!structural_equal(*a.children[i], *b.children[i])) return false;
      return true;
    }
    case NodeKind::kStringLiteral:
      return a.str_value == b.str_value;
    default:
      // Simple statements and expressions: token runs, with string
      // literals normalized by value.
      return token_range_equal(a.tok_begin, a.tok_end, b.tok_begin, b.tok_end);
  }
}

namespace {

void collect_blocks(const Node& owner, const Node& node,
                    std::vector<BlockRef>& out) {
  if (node.kind == NodeKind::kModule) {
    out.push_back({&node, node.children[0].get()});
    collect_blocks(node, *node.children[0], out);
    return;
  }
  if (node.kind == NodeKind::kBlock) {
    for (const auto& stmt : node.children) collect_blocks(owner, *stmt, out);
    return;
  }
  if (node.is_compound_statement()) {
    for (const auto& clause : node.children) {
      out.push_back({clause.get(), clause->children[0].get()});
      collect_blocks(*clause, *clause->children[0], out);
    }
  }
}

}  // namespace

std::vector<BlockRef> enumerate_blocks(const ProgramTree& tree) {
  std::vector<BlockRef> out;
  collect_blocks(tree.root(), tree.root(), out);
  return out;
}

int module_prologue_length(const ProgramTree& tree) {
  const Node& block = *tree.root().children[0];
  int n = 0;
  bool first = true;
  for (const NodeUp& stmt : block.children) {
    bool prologue = false;
    if (first && stmt->kind == NodeKind::kExpressionStmt &&
        !stmt->children.empty() &&
        stmt->children[0]->kind == NodeKind::kStringLiteral)
      prologue = true;
    if (stmt->kind == NodeKind::kStatement && stmt->name == "from") {
      const Token* second = stmt->tok_begin + 1;
      if (second < stmt->tok_end && second->is_name("__future__"))
        prologue = true;
    }
    first = false;
    if (!prologue) break;
    ++n;
  }
  return n;
}

std::string render_source(const ProgramTree& tree) {
  return std::string(tree.source());
}

std::string render_tokens(const Token* begin, const Token* end) {
  std::string out;
  for (const Token* t = begin; t < end; ++t) {
    if (t->kind == TokKind::kNewline || t->kind == TokKind::kIndent ||
        t->kind == TokKind::kDedent || t->kind == TokKind::kEnd)
      continue;
    if (!out.empty()) {
      const Token* p = t - 1;
      bool tight_after = p->is_op("(") || p->is_op("[") || p->is_op("{") ||
                         p->is_op(".") || p->is_op("~") || p->is_op("**");
      bool tight_before = t->is_op(")") || t->is_op("]") || t->is_op("}") ||
                          t->is_op(",") || t->is_op(":") || t->is_op(";") ||
                          t->is_op(".");
      bool call_like =
          (t->is_op("(") || t->is_op("[")) &&
          (p->kind == TokKind::kName || p->kind == TokKind::kNumber ||
           p->kind == TokKind::kString || is_close(*p)) &&
          !(p->kind == TokKind::kName && is_keyword(p->text));
      if (!tight_after && !tight_before && !call_like) out.push_back(' ');
    }
    out.append(t->text);
  }
  return out;
}

}  // namespace faultinj
