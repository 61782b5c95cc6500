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

#include "faultinj/dsl.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace faultinj {

namespace {

struct DirectiveInfo {
  DirectiveKind kind;
  bool pattern_side;      // may declare matches
  bool replacement_side;  // may appear in replacements
  std::set<std::string> allowed_attrs;
};

// Directive registry. Adding a directive is one row here plus its
// matching/expansion behavior in the scanner or mutator.
const std::map<std::string, DirectiveInfo>& directive_table() {
  static const std::map<std::string, DirectiveInfo> table = {
      {"CALL", {DirectiveKind::kCall, true, true, {"name", "tag"}}},
      {"BLOCK", {DirectiveKind::kBlock, true, true, {"tag", "min", "max"}}},
      {"EXPR", {DirectiveKind::kExpr, true, true, {"tag"}}},
      {"STRING",
       {DirectiveKind::kString, true, true, {"tag", "contains", "match"}}},
      {"CORRUPT", {DirectiveKind::kCorrupt, false, true, {"mode", "seed"}}},
      {"HOG", {DirectiveKind::kHog, false, true, {"resource", "threads"}}},
      {"TIMEOUT", {DirectiveKind::kTimeout, false, true, {"ms"}}},
  };
  return table;
}

const DirectiveInfo* lookup_directive(std::string_view name) {
  auto it = directive_table().find(std::string(name));
  return it == directive_table().end() ? nullptr : &it->second;
}

const std::set<std::string_view> kExprContinueKeywords = {
    "if", "else", "for", "in", "is", "and", "or", "not", "from", "as"};

bool is_open_tok(const Token& t) {
  return t.is_op("(") || t.is_op("[") || t.is_op("{");
}
bool is_close_tok(const Token& t) {
  return t.is_op(")") || t.is_op("]") || t.is_op("}");
}

std::vector<std::string_view> clause_continuations(std::string_view opener) {
  if (opener == "if") return {"elif", "else"};
  if (opener == "try") return {"except", "else", "finally"};
  if (opener == "for" || opener == "while") return {"else"};
  return {};
}

std::string unquote_attr_value(std::string_view raw, SourcePos pos) {
  if (raw.size() < 2) throw ParseError("malformed quoted attribute", pos);
  char q = raw.front();
  if (raw.back() != q) throw ParseError("malformed quoted attribute", pos);
  std::string out;
  for (size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\' && i + 2 < raw.size() &&
        (raw[i + 1] == q || raw[i + 1] == '\\')) {
      out.push_back(raw[++i]);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

long parse_int_attr(const std::string& key, const std::string& value,
                    SourcePos pos) {
  try {
    size_t consumed = 0;
    long v = std::stol(value, &consumed);
    if (consumed != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("malformed attribute '" + key + "': expected integer, got '" +
                         value + "'",
                     pos);
  }
}

// Attribute block of a directive token: the `{...}` folded into the token
// text by the lexer. Values may be quoted; unquoted values run to the
// next top-level ',' or '}'.
void parse_directive_attrs(DirectiveSpec& dir, std::string_view tok_text,
                           const DirectiveInfo& info, SourcePos pos) {
  size_t brace = tok_text.find('{');
  if (brace == std::string_view::npos) return;
  std::string_view body = tok_text.substr(brace + 1);
  if (!body.empty() && body.back() == '}') body.remove_suffix(1);

  size_t i = 0;
  while (i < body.size()) {
    while (i < body.size() && (body[i] == ' ' || body[i] == ',')) ++i;
    if (i >= body.size()) break;
    size_t eq = body.find('=', i);
    if (eq == std::string_view::npos)
      throw ParseError("malformed attribute: expected key=value", pos);
    std::string key = trim(body.substr(i, eq - i));
    size_t v = eq + 1;
    while (v < body.size() && body[v] == ' ') ++v;
    std::string value;
    if (v < body.size() && (body[v] == '\'' || body[v] == '"')) {
      char q = body[v];
      size_t end = v + 1;
      while (end < body.size()) {
        if (body[end] == '\\' && end + 1 < body.size()) end += 2;
        else if (body[end] == q) break;
        else ++end;
      }
      if (end >= body.size())
        throw ParseError("malformed quoted attribute", pos);
      value = unquote_attr_value(body.substr(v, end - v + 1), pos);
      i = end + 1;
    } else {
      size_t end = v;
      int depth = 0;
      while (end < body.size()) {
        if (body[end] == '{' || body[end] == '[' || body[end] == '(') ++depth;
        if (body[end] == '}' || body[end] == ']' || body[end] == ')') --depth;
        if (body[end] == ',' && depth == 0) break;
        ++end;
      }
      value = trim(body.substr(v, end - v));
      i = end;
    }
    if (key.empty())
      throw ParseError("malformed attribute: empty key", pos);
    if (key == "tag") {
      dir.tag = value;
      continue;
    }
    if (info.allowed_attrs.count(key) == 0)
      throw ParseError("unknown attribute '" + key + "' for $" +
                           std::string(directive_name(dir.kind)),
                       pos);
    dir.attrs.emplace_back(key, value);
  }
}

class SpecParser {
 public:
  SpecParser(const std::vector<Token>& toks) : toks_(toks) {}

  void parse(BugSpec& out) {
    expect_name("change");
    expect_op("{");
    out.pattern = parse_seq();
    expect_op("}");
    expect_name("into");
    expect_op("{");
    out.replacement = parse_seq();
    expect_op("}");
    if (cur().kind != TokKind::kEnd) fail("unexpected trailing input");
    if (out.pattern.empty())
      throw ParseError("empty pattern", SourcePos{1, 1});
  }

 private:
  const Token& cur() const { return toks_[idx_]; }
  const Token& peek(size_t n) const {
    return toks_[std::min(idx_ + n, toks_.size() - 1)];
  }
  void bump() { ++idx_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, cur().pos);
  }
  void expect_name(std::string_view n) {
    if (!cur().is_name(n)) fail("expected '" + std::string(n) + "'");
    bump();
  }
  void expect_op(std::string_view o) {
    if (!cur().is_op(o)) fail("expected '" + std::string(o) + "'");
    bump();
  }

  std::vector<PatternElement> parse_seq() {
    std::vector<PatternElement> out;
    for (;;) {
      while (cur().is_op(";")) bump();
      if (cur().is_op("}") || cur().kind == TokKind::kEnd) return out;
      out.push_back(parse_element());
    }
  }

  // A depth-0 ':' must appear before the sequence closes; otherwise the
  // tokens are kept as a flat fragment and rejected by compile_spec with
  // the fragment's position.
  bool header_colon_ahead() const {
    int depth = 0;
    for (size_t i = idx_; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (is_open_tok(t)) ++depth;
      if (is_close_tok(t)) {
        if (t.is_op("}") && depth == 0) return false;
        --depth;
      }
      if (t.is_op(":") && depth == 0) return true;
      if (t.is_op(";") && depth == 0) return false;
      if (t.kind == TokKind::kEnd) return false;
    }
    return false;
  }

  bool starts_compound() const {
    if (cur().kind != TokKind::kName) return false;
    std::string_view w = cur().text;
    bool keyword =
        w == "if" || w == "while" || w == "for" || w == "try" || w == "with" ||
        w == "def" || w == "class" || w == "match" || w == "case";
    if (w == "async")
      keyword = peek(1).is_name("def") || peek(1).is_name("for") ||
                peek(1).is_name("with");
    return keyword && header_colon_ahead();
  }

  PatternElement parse_element() {
    PatternElement el;
    el.pos = cur().pos;
    if (cur().kind == TokKind::kDirective || cur().kind == TokKind::kTagRef) {
      auto dir = parse_directive_form();
      bool statement_only = dir->kind == DirectiveKind::kBlock ||
                            dir->kind == DirectiveKind::kHog ||
                            dir->kind == DirectiveKind::kTimeout;
      if (statement_only || !continues_expression()) {
        el.kind = PatternElement::Kind::kDirective;
        el.directive = std::move(dir);
        return el;
      }
      // The directive opens a literal fragment: `$EXPR#t = ...`.
      el.kind = PatternElement::Kind::kLiteral;
      FragmentPiece piece;
      piece.is_hole = true;
      piece.hole = std::move(dir);
      el.pieces.push_back(std::move(piece));
      scan_fragment(el.pieces, /*after_operand=*/true);
      return el;
    }
    if (starts_compound()) return parse_compound_element();
    el.kind = PatternElement::Kind::kLiteral;
    scan_fragment(el.pieces, /*after_operand=*/false);
    if (el.pieces.empty()) fail("expected a pattern element");
    return el;
  }

  bool continues_expression() const {
    const Token& t = cur();
    if (t.kind == TokKind::kOp && !t.is_op("}") && !t.is_op(";") &&
        !t.is_op(")"))
      return true;
    if (t.kind == TokKind::kName && kExprContinueKeywords.count(t.text) > 0)
      return true;
    return false;
  }

  // Collects literal-fragment pieces up to the end of one statement.
  // Statements end at depth-0 '}' or ';', or when a complete expression
  // is followed by a token that cannot extend it.
  void scan_fragment(std::vector<FragmentPiece>& pieces, bool after_operand) {
    int depth = 0;
    for (;;) {
      const Token& t = cur();
      if (t.kind == TokKind::kEnd) return;
      if (depth == 0) {
        if (t.is_op("}")) return;
        if (t.is_op(";")) {
          bump();
          return;
        }
        if (after_operand && ends_statement(t)) return;
      }
      if (t.kind == TokKind::kDirective || t.kind == TokKind::kTagRef) {
        FragmentPiece piece;
        piece.is_hole = true;
        piece.hole = parse_directive_form();
        pieces.push_back(std::move(piece));
        after_operand = true;
        continue;
      }
      if (is_open_tok(t)) ++depth;
      if (is_close_tok(t)) --depth;
      FragmentPiece piece;
      piece.token = t;
      pieces.push_back(piece);
      after_operand = operand_like(t);
      bump();
    }
  }

  static bool operand_like(const Token& t) {
    if (t.kind == TokKind::kNumber || t.kind == TokKind::kString) return true;
    if (is_close_tok(t)) return true;
    if (t.kind == TokKind::kName) {
      if (!is_keyword(t.text)) return true;
      return t.text == "True" || t.text == "False" || t.text == "None" ||
             t.text == "pass" || t.text == "continue" || t.text == "break";
    }
    return false;
  }

  static bool ends_statement(const Token& t) {
    if (t.kind == TokKind::kDirective || t.kind == TokKind::kTagRef)
      return true;
    if (t.kind == TokKind::kNumber || t.kind == TokKind::kString) return true;
    if (t.kind == TokKind::kName)
      return kExprContinueKeywords.count(t.text) == 0;
    return false;
  }

  PatternElement parse_compound_element() {
    PatternElement el;
    el.pos = cur().pos;
    el.kind = PatternElement::Kind::kLiteral;
    el.compound = true;
    std::string_view opener =
        cur().is_name("async") ? peek(1).text : cur().text;
    for (;;) {
      ClausePattern clause;
      clause.keyword =
          std::string(cur().is_name("async") ? peek(1).text : cur().text);
      scan_clause_header(clause.header);
      expect_op("{");
      clause.body = parse_seq();
      expect_op("}");
      if (clause.body.empty()) fail("empty suite in pattern");
      el.clauses.push_back(std::move(clause));
      bool more = false;
      for (std::string_view cont : clause_continuations(opener)) {
        if (cur().is_name(cont)) {
          more = true;
          break;
        }
      }
      if (!more) break;
    }
    return el;
  }

  // Header tokens (holes allowed) up to the depth-0 ':' which is
  // consumed but not stored.
  void scan_clause_header(std::vector<FragmentPiece>& header) {
    int depth = 0;
    bool lambda_pending = false;
    for (;;) {
      const Token& t = cur();
      if (t.kind == TokKind::kEnd) fail("expected ':' in compound pattern");
      if (t.kind == TokKind::kDirective || t.kind == TokKind::kTagRef) {
        FragmentPiece piece;
        piece.is_hole = true;
        piece.hole = parse_directive_form();
        header.push_back(std::move(piece));
        continue;
      }
      if (is_open_tok(t)) ++depth;
      if (is_close_tok(t)) --depth;
      if (t.kind == TokKind::kName && t.text == "lambda" && depth == 0)
        lambda_pending = true;
      if (t.is_op(":") && depth == 0) {
        if (lambda_pending) {
          lambda_pending = false;
        } else {
          bump();
          return;
        }
      }
      FragmentPiece piece;
      piece.token = t;
      header.push_back(piece);
      bump();
    }
  }

  std::shared_ptr<DirectiveSpec> parse_directive_form() {
    auto dir = std::make_shared<DirectiveSpec>();
    dir->pos = cur().pos;
    if (cur().kind == TokKind::kTagRef) {
      dir->kind = DirectiveKind::kTagRef;
      dir->tag = std::string(cur().text.substr(1));
      if (dir->tag.empty()) fail("expected tag name after '#'");
      bump();
      return dir;
    }
    std::string_view text = cur().text;
    size_t name_end = text.find('{');
    std::string_view name = text.substr(1, name_end == std::string_view::npos
                                               ? std::string_view::npos
                                               : name_end - 1);
    const DirectiveInfo* info = lookup_directive(name);
    if (info == nullptr)
      fail("unknown directive $" + std::string(name));
    dir->kind = info->kind;
    parse_directive_attrs(*dir, text, *info, cur().pos);
    bump();
    if (cur().kind == TokKind::kTagRef) {
      if (!dir->tag.empty()) fail("tag given twice");
      dir->tag = std::string(cur().text.substr(1));
      bump();
    }
    if (cur().is_op("(")) {
      bump();
      if (cur().is_op("...")) {
        dir->arg_mode = DirectiveSpec::ArgMode::kAnyArity;
        bump();
        expect_op(")");
      } else {
        dir->arg_mode = DirectiveSpec::ArgMode::kList;
        while (!cur().is_op(")")) {
          dir->args.push_back(parse_arg_element());
          if (cur().is_op(","))
            bump();
          else
            break;
        }
        expect_op(")");
      }
    }
    return dir;
  }

  // One expression-position element inside a directive's argument list;
  // runs to the next depth-0 ',' or ')'.
  PatternElement parse_arg_element() {
    PatternElement el;
    el.pos = cur().pos;
    if (cur().kind == TokKind::kDirective || cur().kind == TokKind::kTagRef) {
      auto dir = parse_directive_form();
      if (cur().is_op(",") || cur().is_op(")")) {
        el.kind = PatternElement::Kind::kDirective;
        el.directive = std::move(dir);
        return el;
      }
      el.kind = PatternElement::Kind::kLiteral;
      FragmentPiece piece;
      piece.is_hole = true;
      piece.hole = std::move(dir);
      el.pieces.push_back(std::move(piece));
    } else {
      el.kind = PatternElement::Kind::kLiteral;
    }
    int depth = 0;
    for (;;) {
      const Token& t = cur();
      if (t.kind == TokKind::kEnd) fail("unterminated argument pattern");
      if (depth == 0 && (t.is_op(",") || t.is_op(")"))) return el;
      if (t.kind == TokKind::kDirective || t.kind == TokKind::kTagRef) {
        FragmentPiece piece;
        piece.is_hole = true;
        piece.hole = parse_directive_form();
        el.pieces.push_back(std::move(piece));
        continue;
      }
      if (is_open_tok(t)) ++depth;
      if (is_close_tok(t)) --depth;
      FragmentPiece piece;
      piece.token = t;
      el.pieces.push_back(piece);
      bump();
    }
  }

  const std::vector<Token>& toks_;
  size_t idx_ = 0;
};

// --- tag collection -----------------------------------------------------

void collect_pattern_tags(const PatternElement& el,
                          std::vector<std::pair<std::string, DirectiveKind>>& out);

void collect_directive_tags(
    const DirectiveSpec& dir,
    std::vector<std::pair<std::string, DirectiveKind>>& out) {
  if (!dir.tag.empty()) out.emplace_back(dir.tag, dir.kind);
  for (const auto& arg : dir.args) collect_pattern_tags(arg, out);
}

void collect_pattern_tags(
    const PatternElement& el,
    std::vector<std::pair<std::string, DirectiveKind>>& out) {
  if (el.kind == PatternElement::Kind::kDirective) {
    collect_directive_tags(*el.directive, out);
    return;
  }
  for (const auto& piece : el.pieces)
    if (piece.is_hole) collect_directive_tags(*piece.hole, out);
  for (const auto& clause : el.clauses) {
    for (const auto& piece : clause.header)
      if (piece.is_hole) collect_directive_tags(*piece.hole, out);
    for (const auto& sub : clause.body) collect_pattern_tags(sub, out);
  }
}

void for_each_directive(const PatternElement& el,
                        const std::function<void(const DirectiveSpec&)>& fn) {
  if (el.kind == PatternElement::Kind::kDirective) {
    fn(*el.directive);
    for (const auto& arg : el.directive->args) for_each_directive(arg, fn);
    return;
  }
  for (const auto& piece : el.pieces) {
    if (piece.is_hole) {
      fn(*piece.hole);
      for (const auto& arg : piece.hole->args) for_each_directive(arg, fn);
    }
  }
  for (const auto& clause : el.clauses) {
    for (const auto& piece : clause.header) {
      if (piece.is_hole) {
        fn(*piece.hole);
        for (const auto& arg : piece.hole->args) for_each_directive(arg, fn);
      }
    }
    for (const auto& sub : clause.body) for_each_directive(sub, fn);
  }
}

// --- deep clone (shared_ptr members must not alias across compile) ------

PatternElement clone_element(const PatternElement& el);

std::shared_ptr<DirectiveSpec> clone_directive(const DirectiveSpec& d) {
  auto out = std::make_shared<DirectiveSpec>(d);
  out->args.clear();
  for (const auto& arg : d.args) out->args.push_back(clone_element(arg));
  return out;
}

FragmentPiece clone_piece(const FragmentPiece& p) {
  FragmentPiece out;
  out.is_hole = p.is_hole;
  out.token = p.token;
  if (p.hole) out.hole = clone_directive(*p.hole);
  return out;
}

PatternElement clone_element(const PatternElement& el) {
  PatternElement out;
  out.kind = el.kind;
  if (el.directive) out.directive = clone_directive(*el.directive);
  for (const auto& piece : el.pieces) out.pieces.push_back(clone_piece(piece));
  out.compound = el.compound;
  for (const auto& clause : el.clauses) {
    ClausePattern c;
    c.keyword = clause.keyword;
    for (const auto& piece : clause.header)
      c.header.push_back(clone_piece(piece));
    for (const auto& sub : clause.body) c.body.push_back(clone_element(sub));
    out.clauses.push_back(std::move(c));
  }
  out.stmt_kind = el.stmt_kind;
  out.pos = el.pos;
  return out;
}

// --- placeholder rendering for compile-time fragment validation ---------

std::string render_pieces_placeholder(const std::vector<FragmentPiece>& pieces,
                                      int& counter);

std::string render_piece_placeholder(const FragmentPiece& piece,
                                     int& counter) {
  if (!piece.is_hole) return std::string(piece.token.text);
  return "__fih" + std::to_string(counter++);
}

std::string render_pieces_placeholder(const std::vector<FragmentPiece>& pieces,
                                      int& counter) {
  std::string out;
  for (size_t i = 0; i < pieces.size(); ++i) {
    std::string text = render_piece_placeholder(pieces[i], counter);
    if (!out.empty()) {
      char prev = out.back();
      char next = text.empty() ? ' ' : text.front();
      bool tight = prev == '(' || prev == '[' || prev == '{' || prev == '.' ||
                   next == ')' || next == ']' || next == '}' || next == ',' ||
                   next == ':' || next == '.' || next == '(' || next == '[';
      if (!tight) out.push_back(' ');
    }
    out += text;
  }
  return out;
}

void validate_fragment_parses(const PatternElement& el);

void validate_compound_parses(const PatternElement& el) {
  int counter = 0;
  std::string text;
  for (const auto& clause : el.clauses) {
    text += render_pieces_placeholder(clause.header, counter);
    text += ":\n    pass\n";
  }
  // 'except'/'elif' style clause groups need their opener to parse.
  std::string first = el.clauses.front().keyword;
  if (first == "elif" || first == "else")
    text = "if __fih_c:\n    pass\n" + text;
  if (first == "except" || first == "finally")
    text = "try:\n    pass\n" + text;
  try {
    parse_source(text, "<pattern>");
  } catch (const ParseError& e) {
    throw ParseError("pattern fragment is not valid Python: " +
                         std::string(e.what()),
                     el.pos);
  }
  for (const auto& clause : el.clauses)
    for (const auto& sub : clause.body) validate_fragment_parses(sub);
}

NodeKind placeholder_stmt_kind(const PatternElement& el) {
  int counter = 0;
  std::string text = render_pieces_placeholder(el.pieces, counter) + "\n";
  ProgramTree tree = parse_source(text, "<pattern>");
  const Node& block = *tree.root().children[0];
  if (block.children.size() != 1)
    throw ParseError("pattern fragment must be a single statement", el.pos);
  return block.children[0]->kind;
}

void validate_fragment_parses(const PatternElement& el) {
  if (el.kind == PatternElement::Kind::kDirective) return;
  if (el.compound) {
    validate_compound_parses(el);
    return;
  }
  try {
    placeholder_stmt_kind(el);
  } catch (const ParseError& e) {
    if (std::string(e.what()).find("single statement") != std::string::npos)
      throw;
    throw ParseError(
        "pattern fragment is not valid Python: " + std::string(e.what()),
        el.pos);
  }
}

void compile_directive(DirectiveSpec& dir) {
  switch (dir.kind) {
    case DirectiveKind::kCall:
      dir.name_glob = dir.attr("name");
      break;
    case DirectiveKind::kBlock:
      dir.min = dir.has_attr("min")
                    ? static_cast<int>(parse_int_attr("min", dir.attr("min"),
                                                      dir.pos))
                    : 1;
      dir.max = dir.has_attr("max")
                    ? static_cast<int>(parse_int_attr("max", dir.attr("max"),
                                                      dir.pos))
                    : INT_MAX;
      if (dir.min < 0 || dir.max < dir.min)
        throw ParseError("invalid $BLOCK bounds: min=" +
                             std::to_string(dir.min) +
                             " max=" + std::to_string(dir.max),
                         dir.pos);
      break;
    case DirectiveKind::kString:
      dir.contains = dir.attr("contains");
      if (dir.has_attr("match")) {
        try {
          dir.match_regex =
              std::make_shared<const std::regex>(dir.attr("match"));
        } catch (const std::regex_error& e) {
          throw ParseError(
              "malformed attribute 'match': " + std::string(e.what()),
              dir.pos);
        }
      }
      break;
    case DirectiveKind::kCorrupt:
      dir.corrupt_mode = dir.has_attr("mode") ? dir.attr("mode") : "random";
      if (dir.corrupt_mode != "random" && dir.corrupt_mode != "none" &&
          dir.corrupt_mode != "negate")
        throw ParseError("malformed attribute 'mode': expected random, none "
                         "or negate",
                         dir.pos);
      if (dir.has_attr("seed"))
        dir.seed = parse_int_attr("seed", dir.attr("seed"), dir.pos);
      break;
    case DirectiveKind::kHog: {
      std::string resource =
          dir.has_attr("resource") ? dir.attr("resource") : "cpu";
      if (resource != "cpu")
        throw ParseError("only cpu hogs are supported", dir.pos);
      dir.threads =
          dir.has_attr("threads")
              ? static_cast<int>(parse_int_attr("threads",
                                                dir.attr("threads"), dir.pos))
              : 1;
      if (dir.threads < 1)
        throw ParseError("threads must be >= 1", dir.pos);
      break;
    }
    case DirectiveKind::kTimeout:
      if (!dir.has_attr("ms"))
        throw ParseError("$TIMEOUT requires an ms attribute", dir.pos);
      dir.ms = parse_int_attr("ms", dir.attr("ms"), dir.pos);
      if (dir.ms < 0) throw ParseError("ms must be >= 0", dir.pos);
      break;
    default:
      break;
  }
}

void compile_element(PatternElement& el) {
  if (el.kind == PatternElement::Kind::kDirective) {
    compile_directive(*el.directive);
    for (auto& arg : el.directive->args) compile_element(arg);
    return;
  }
  for (auto& piece : el.pieces) {
    if (piece.is_hole) {
      compile_directive(*piece.hole);
      for (auto& arg : piece.hole->args) compile_element(arg);
    }
  }
  for (auto& clause : el.clauses) {
    for (auto& piece : clause.header) {
      if (piece.is_hole) {
        compile_directive(*piece.hole);
        for (auto& arg : piece.hole->args) compile_element(arg);
      }
    }
    for (auto& sub : clause.body) compile_element(sub);
  }
  validate_fragment_parses(el);
  if (!el.compound) el.stmt_kind = placeholder_stmt_kind(el);
}

// --- rendering -----------------------------------------------------------

std::string render_element(const PatternElement& el);

std::string render_directive(const DirectiveSpec& dir) {
  if (dir.kind == DirectiveKind::kTagRef) return "#" + dir.tag;
  std::string out = "$";
  out += directive_name(dir.kind);
  if (!dir.attrs.empty()) {
    out += "{";
    for (size_t i = 0; i < dir.attrs.size(); ++i) {
      if (i > 0) out += ", ";
      const auto& [k, v] = dir.attrs[i];
      bool needs_quote = v.find_first_of(",{}'\" ") != std::string::npos ||
                         v.empty();
      if (needs_quote) {
        out += k + "=\"";
        for (char c : v) {
          if (c == '"' || c == '\\') out.push_back('\\');
          out.push_back(c);
        }
        out += "\"";
      } else {
        out += k + "=" + v;
      }
    }
    out += "}";
  }
  if (!dir.tag.empty()) out += "#" + dir.tag;
  if (dir.arg_mode == DirectiveSpec::ArgMode::kAnyArity) {
    out += "(...)";
  } else if (dir.arg_mode == DirectiveSpec::ArgMode::kList) {
    out += "(";
    for (size_t i = 0; i < dir.args.size(); ++i) {
      if (i > 0) out += ", ";
      out += render_element(dir.args[i]);
    }
    out += ")";
  }
  return out;
}

std::string render_pieces(const std::vector<FragmentPiece>& pieces) {
  std::string out;
  for (const auto& piece : pieces) {
    std::string text = piece.is_hole ? render_directive(*piece.hole)
                                     : std::string(piece.token.text);
    if (!out.empty()) {
      char prev = out.back();
      char next = text.empty() ? ' ' : text.front();
      bool tight = prev == '(' || prev == '[' || prev == '{' || prev == '.' ||
                   next == ')' || next == ']' || next == '}' || next == ',' ||
                   next == ':' || next == '.';
      if (!tight) out.push_back(' ');
    }
    out += text;
  }
  return out;
}

std::string render_element(const PatternElement& el) {
  if (el.kind == PatternElement::Kind::kDirective)
    return render_directive(*el.directive);
  if (!el.compound) return render_pieces(el.pieces);
  std::string out;
  for (size_t i = 0; i < el.clauses.size(); ++i) {
    const auto& clause = el.clauses[i];
    if (i > 0) out += " ";
    out += render_pieces(clause.header);
    out += " : { ";
    for (size_t k = 0; k < clause.body.size(); ++k) {
      if (k > 0) out += " ";
      out += render_element(clause.body[k]);
    }
    out += " }";
  }
  return out;
}

std::string render_seq(const std::vector<PatternElement>& seq) {
  std::string out;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i > 0) out += " ";
    out += render_element(seq[i]);
  }
  return out;
}

void serialize_element(const PatternElement& el, std::string indent,
                       std::ostream& os);

void serialize_directive(const DirectiveSpec& d, std::string indent,
                         std::ostream& os) {
  os << indent << "$" << directive_name(d.kind);
  if (!d.tag.empty()) os << " tag=" << d.tag;
  switch (d.kind) {
    case DirectiveKind::kCall:
      if (!d.name_glob.empty()) os << " name=" << d.name_glob;
      os << (d.arg_mode == DirectiveSpec::ArgMode::kAnyArity ? " args=any"
             : d.arg_mode == DirectiveSpec::ArgMode::kList   ? " args=list"
                                                             : "");
      break;
    case DirectiveKind::kBlock:
      os << " min=" << d.min;
      if (d.max != INT_MAX) os << " max=" << d.max;
      break;
    case DirectiveKind::kString:
      if (!d.contains.empty()) os << " contains=" << d.contains;
      if (d.match_regex) os << " match=" << d.attr("match");
      break;
    case DirectiveKind::kCorrupt:
      os << " mode=" << d.corrupt_mode;
      if (d.seed) os << " seed=" << *d.seed;
      break;
    case DirectiveKind::kHog:
      os << " threads=" << d.threads;
      break;
    case DirectiveKind::kTimeout:
      os << " ms=" << d.ms;
      break;
    default:
      break;
  }
  os << "\n";
  for (const auto& arg : d.args) serialize_element(arg, indent + "  ", os);
}

void serialize_element(const PatternElement& el, std::string indent,
                       std::ostream& os) {
  if (el.kind == PatternElement::Kind::kDirective) {
    serialize_directive(*el.directive, indent, os);
    return;
  }
  if (el.compound) {
    for (const auto& clause : el.clauses) {
      os << indent << "compound " << clause.keyword << ": "
         << render_pieces(clause.header) << "\n";
      for (const auto& sub : clause.body)
        serialize_element(sub, indent + "  ", os);
    }
    return;
  }
  os << indent << "literal[" << static_cast<int>(el.stmt_kind)
     << "] " << render_pieces(el.pieces) << "\n";
}

}  // namespace

const char* directive_name(DirectiveKind kind) {
  switch (kind) {
    case DirectiveKind::kCall: return "CALL";
    case DirectiveKind::kBlock: return "BLOCK";
    case DirectiveKind::kExpr: return "EXPR";
    case DirectiveKind::kString: return "STRING";
    case DirectiveKind::kCorrupt: return "CORRUPT";
    case DirectiveKind::kHog: return "HOG";
    case DirectiveKind::kTimeout: return "TIMEOUT";
    case DirectiveKind::kTagRef: return "REF";
  }
  return "?";
}

std::string DirectiveSpec::attr(const std::string& key) const {
  for (const auto& [k, v] : attrs)
    if (k == key) return v;
  return "";
}

bool DirectiveSpec::has_attr(const std::string& key) const {
  for (const auto& [k, v] : attrs)
    if (k == key) return true;
  return false;
}

BugSpec parse_spec(std::string_view text, std::string name) {
  BugSpec spec;
  spec.name = std::move(name);
  spec.source_text = std::make_shared<const std::string>(text);
  LexOptions opts;
  opts.layout = false;
  opts.dsl = true;
  std::vector<Token> tokens = lex(*spec.source_text, opts);
  SpecParser parser(tokens);
  parser.parse(spec);
  return spec;
}

std::vector<Diagnostic> validate_spec(const BugSpec& spec) {
  std::vector<Diagnostic> diags;
  if (spec.pattern.empty()) {
    diags.push_back({"empty-pattern", "pattern is empty", {}});
    return diags;
  }

  std::vector<std::pair<std::string, DirectiveKind>> declared;
  for (const auto& el : spec.pattern) collect_pattern_tags(el, declared);
  std::set<std::string> pattern_tags;
  for (const auto& [tag, kind] : declared) {
    (void)kind;
    if (!pattern_tags.insert(tag).second)
      diags.push_back({"duplicate-tag", "duplicate tag " + tag, {}});
  }

  for (const auto& el : spec.pattern) {
    for_each_directive(el, [&](const DirectiveSpec& d) {
      if (d.kind == DirectiveKind::kCorrupt || d.kind == DirectiveKind::kHog ||
          d.kind == DirectiveKind::kTimeout || d.kind == DirectiveKind::kTagRef)
        diags.push_back({"wrong-side",
                         std::string("$") + directive_name(d.kind) +
                             " is not allowed in a code pattern",
                         d.pos});
    });
  }

  // Replacement side: tags must resolve; untagged pattern-kind directives
  // must be unambiguous implicit references.
  std::map<DirectiveKind, int> pattern_kind_counts;
  for (const auto& el : spec.pattern)
    if (el.kind == PatternElement::Kind::kDirective)
      pattern_kind_counts[el.directive->kind]++;

  for (const auto& el : spec.replacement) {
    for_each_directive(el, [&](const DirectiveSpec& d) {
      bool is_reference = d.kind == DirectiveKind::kTagRef ||
                          d.kind == DirectiveKind::kCall ||
                          d.kind == DirectiveKind::kBlock ||
                          d.kind == DirectiveKind::kExpr ||
                          d.kind == DirectiveKind::kString;
      if (!is_reference) return;
      if (!d.tag.empty()) {
        if (pattern_tags.count(d.tag) == 0)
          diags.push_back({"unbound-tag", "unbound tag " + d.tag, d.pos});
      } else if (d.kind != DirectiveKind::kTagRef) {
        if (pattern_kind_counts[d.kind] != 1)
          diags.push_back(
              {"ambiguous-reference",
               std::string("untagged $") + directive_name(d.kind) +
                   " in replacement does not match exactly one pattern node",
               d.pos});
      }
    });
  }
  return diags;
}

MetaModel compile_spec(const BugSpec& spec) {
  std::vector<Diagnostic> diags = validate_spec(spec);
  if (!diags.empty())
    throw ParseError("invalid spec: " + diags.front().message,
                     diags.front().pos);

  MetaModel model;
  model.spec_name = spec.name;
  model.source_text = spec.source_text;
  for (const auto& el : spec.pattern)
    model.pattern_tree.push_back(clone_element(el));
  for (const auto& el : spec.replacement)
    model.replacement_template.push_back(clone_element(el));

  for (auto& el : model.pattern_tree) compile_element(el);
  for (auto& el : model.replacement_template) {
    if (el.kind == PatternElement::Kind::kDirective) {
      compile_directive(*el.directive);
      for (auto& arg : el.directive->args) compile_element(arg);
    } else {
      compile_element(el);
    }
  }

  std::vector<std::pair<std::string, DirectiveKind>> declared;
  for (const auto& el : model.pattern_tree) collect_pattern_tags(el, declared);
  for (const auto& [tag, kind] : declared) model.tag_table[tag] = kind;
  return model;
}

std::string render_spec(const BugSpec& spec) {
  return "change { " + render_seq(spec.pattern) + " } into { " +
         render_seq(spec.replacement) + " }";
}

std::string serialize_meta_model(const MetaModel& model) {
  std::ostringstream os;
  os << "meta-model " << model.spec_name << "\n";
  os << "pattern:\n";
  for (const auto& el : model.pattern_tree) serialize_element(el, "  ", os);
  os << "replacement:\n";
  for (const auto& el : model.replacement_template)
    serialize_element(el, "  ", os);
  os << "tags:";
  for (const auto& [tag, kind] : model.tag_table)
    os << " " << tag << "=" << directive_name(kind);
  os << "\n";
  return os.str();
}

FaultModelFile load_fault_model(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("fault model " + path.string() +
                             " is not valid JSON: " + e.what());
  }
  auto schema_error = [&](const std::string& json_path,
                          const std::string& what) -> std::runtime_error {
    return std::runtime_error("fault model schema violation at " + json_path +
                              ": " + what);
  };
  if (!doc.is_object()) throw schema_error("/", "expected object");
  if (!doc.contains("format_version") ||
      !doc["format_version"].is_number_integer())
    throw schema_error("/format_version", "expected integer");
  if (doc["format_version"].get<int>() != 1)
    throw schema_error("/format_version", "unsupported version");
  if (!doc.contains("specs") || !doc["specs"].is_array())
    throw schema_error("/specs", "expected array");

  FaultModelFile model;
  model.format_version = 1;
  std::set<std::string> names;
  for (size_t i = 0; i < doc["specs"].size(); ++i) {
    const auto& entry = doc["specs"][i];
    std::string at = "/specs/" + std::to_string(i);
    if (!entry.is_object()) throw schema_error(at, "expected object");
    if (!entry.contains("name") || !entry["name"].is_string())
      throw schema_error(at + "/name", "expected string");
    if (!entry.contains("text") || !entry["text"].is_string())
      throw schema_error(at + "/text", "expected string");
    std::string name = entry["name"].get<std::string>();
    if (!names.insert(name).second)
      throw schema_error(at + "/name", "duplicate spec name '" + name + "'");
    model.specs.push_back(
        parse_spec(entry["text"].get<std::string>(), name));
  }
  return model;
}

void save_fault_model(const FaultModelFile& model,
                      const std::filesystem::path& path) {
  for (const auto& spec : model.specs) {
    std::vector<Diagnostic> diags = validate_spec(spec);
    if (!diags.empty())
      throw std::runtime_error("spec '" + spec.name +
                               "' is invalid: " + diags.front().message);
  }
  std::set<std::string> names;
  for (const auto& spec : model.specs)
    if (!names.insert(spec.name).second)
      throw std::runtime_error("duplicate spec name '" + spec.name + "'");

  nlohmann::ordered_json doc;
  doc["format_version"] = model.format_version;
  doc["specs"] = nlohmann::ordered_json::array();
  for (const auto& spec : model.specs) {
    doc["specs"].push_back({{"name", spec.name},
                            {"text", *spec.source_text}});
  }
  write_file(path, doc.dump(2) + "\n");
}

}  // namespace faultinj
