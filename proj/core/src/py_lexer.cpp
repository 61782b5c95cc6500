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

#include "faultinj/py_lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace faultinj {

namespace {

// Multi-char operators, longest first within each leading char.
const char* kOperators[] = {
    "**=", "//=", ">>=", "<<=", "...", "!=", ">=", "<=", "==", "->",
    ":=",  "+=",  "-=",  "*=",  "/=",  "%=", "@=", "&=", "|=", "^=",
    "**",  "//",  "<<",  ">>",  "+",   "-",  "*",  "/",  "%",  "@",
    "&",   "|",   "^",   "~",   "<",   ">",  "(",  ")",  "[",  "]",
    "{",   "}",   ",",   ":",   ".",   ";",  "=",
};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}
bool is_ident_cont(char c) {
  return is_ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

bool is_string_prefix(std::string_view s) {
  if (s.size() > 2) return false;
  for (char c : s) {
    char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (l != 'r' && l != 'b' && l != 'u' && l != 'f') return false;
  }
  return true;
}

class Lexer {
 public:
  Lexer(std::string_view src, const LexOptions& opts)
      : src_(src), opts_(opts) {
    indents_.push_back(0);
  }

  std::vector<Token> run() {
    if (opts_.layout) lex_line_start();
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\f') {
        advance();
      } else if (c == '\\' && pos_ + 1 < src_.size() &&
                 (src_[pos_ + 1] == '\n' ||
                  (src_[pos_ + 1] == '\r' && peek(2) == '\n'))) {
        advance();  // explicit line join
        consume_newline();
      } else if (c == '\n' || c == '\r') {
        SourcePos eol = here();
        size_t eol_offset = pos_;
        consume_newline();
        if (paren_depth_ == 0 && opts_.layout) {
          if (line_has_token_) emit_at(TokKind::kNewline, "\n", eol_offset, eol);
          lex_line_start();
        }
        line_has_token_ = false;
      } else if (c == '#') {
        if (opts_.dsl && pos_ + 1 < src_.size() && is_ident_start(src_[pos_ + 1])) {
          lex_tag_ref();
        } else {
          skip_comment();
        }
      } else if (opts_.dsl && c == '$') {
        lex_directive();
      } else if (is_ident_start(c)) {
        lex_name_or_prefixed_string();
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
        lex_number();
      } else if (c == '\'' || c == '"') {
        lex_string(pos_);
      } else {
        lex_operator();
      }
    }
    finish();
    return std::move(tokens_);
  }

 private:
  char peek(size_t ahead) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void advance() {
    ++pos_;
    ++col_;
  }

  void consume_newline() {
    if (src_[pos_] == '\r') ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '\n') ++pos_;
    ++line_;
    col_ = 1;
  }

  SourcePos here() const { return SourcePos{line_, col_}; }

  void emit(TokKind kind, size_t start, SourcePos pos) {
    Token t;
    t.kind = kind;
    t.text = src_.substr(start, pos_ - start);
    t.offset = start;
    t.pos = pos;
    tokens_.push_back(t);
    line_has_token_ = true;
  }

  void emit_simple(TokKind kind, std::string_view text) {
    emit_at(kind, text, std::min(pos_, src_.size()), here());
  }

  void emit_at(TokKind kind, std::string_view text, size_t offset,
               SourcePos pos) {
    Token t;
    t.kind = kind;
    t.text = text;
    t.offset = offset;
    t.pos = pos;
    tokens_.push_back(t);
  }

  void skip_comment() {
    while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r')
      advance();
  }

  // Indentation of the next logical line; emits INDENT/DEDENT.
  void lex_line_start() {
    for (;;) {
      size_t scan = pos_;
      int width = 0;
      while (scan < src_.size()) {
        if (src_[scan] == ' ') {
          ++width;
        } else if (src_[scan] == '\t') {
          width = (width / 8 + 1) * 8;
        } else if (src_[scan] == '\f') {
          width = 0;
        } else {
          break;
        }
        ++scan;
      }
      if (scan >= src_.size()) {
        pos_ = scan;
        return;
      }
      // Blank and comment-only lines carry no layout.
      if (src_[scan] == '\n' || src_[scan] == '\r' || src_[scan] == '#') {
        col_ += static_cast<int>(scan - pos_);
        pos_ = scan;
        if (src_[pos_] == '#') skip_comment();
        if (pos_ < src_.size()) consume_newline();
        if (pos_ >= src_.size()) return;
        continue;
      }
      col_ += static_cast<int>(scan - pos_);
      pos_ = scan;
      apply_indent(width);
      return;
    }
  }

  void apply_indent(int width) {
    if (width > indents_.back()) {
      indents_.push_back(width);
      emit_simple(TokKind::kIndent, "");
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        emit_simple(TokKind::kDedent, "");
      }
      if (width != indents_.back())
        throw ParseError("unindent does not match any outer indentation level",
                         here());
    }
  }

  void lex_name_or_prefixed_string() {
    size_t start = pos_;
    SourcePos pos = here();
    while (pos_ < src_.size() && is_ident_cont(src_[pos_])) advance();
    std::string_view word = src_.substr(start, pos_ - start);
    if (pos_ < src_.size() && (src_[pos_] == '\'' || src_[pos_] == '"') &&
        is_string_prefix(word)) {
      lex_string(start);
      return;
    }
    emit(TokKind::kName, start, pos);
  }

  void lex_number() {
    size_t start = pos_;
    SourcePos pos = here();
    // Permissive scan: the goal is faithful spans, not numeric validation.
    bool is_hex = false;
    if (src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X' ||
                              peek(1) == 'o' || peek(1) == 'O' ||
                              peek(1) == 'b' || peek(1) == 'B')) {
      is_hex = (peek(1) == 'x' || peek(1) == 'X');
      advance();
      advance();
    }
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '_' ||
          (is_hex && std::isxdigit(static_cast<unsigned char>(c)))) {
        advance();
      } else if (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
        advance();
      } else if (c == '.' && !is_hex) {
        advance();
        break;
      } else if ((c == 'e' || c == 'E') && !is_hex &&
                 (std::isdigit(static_cast<unsigned char>(peek(1))) ||
                  ((peek(1) == '+' || peek(1) == '-') &&
                   std::isdigit(static_cast<unsigned char>(peek(2)))))) {
        advance();
        advance();
      } else if (c == 'j' || c == 'J') {
        advance();
        break;
      } else {
        break;
      }
    }
    emit(TokKind::kNumber, start, pos);
  }

  void lex_string(size_t start) {
    SourcePos pos{line_, col_ - static_cast<int>(pos_ - start)};
    bool raw = false;
    for (size_t i = start; i < pos_; ++i) {
      char l = static_cast<char>(std::tolower(static_cast<unsigned char>(src_[i])));
      if (l == 'r') raw = true;
    }
    (void)raw;  // end-scan below treats backslash uniformly, as CPython does
    char quote = src_[pos_];
    bool triple = peek(1) == quote && peek(2) == quote;
    advance();
    if (triple) {
      advance();
      advance();
    }
    for (;;) {
      if (pos_ >= src_.size())
        throw ParseError("unterminated string literal", pos);
      char c = src_[pos_];
      if (c == '\\') {
        advance();
        if (pos_ < src_.size()) {
          if (src_[pos_] == '\n' || src_[pos_] == '\r')
            consume_newline();
          else
            advance();
        }
        continue;
      }
      if (c == '\n' || c == '\r') {
        if (!triple) throw ParseError("unterminated string literal", pos);
        consume_newline();
        continue;
      }
      if (c == quote) {
        if (!triple) {
          advance();
          break;
        }
        if (peek(1) == quote && peek(2) == quote) {
          advance();
          advance();
          advance();
          break;
        }
      }
      advance();
    }
    emit(TokKind::kString, start, pos);
  }

  // `$NAME` plus, when attached, its `{k=v,...}` attribute block. The
  // block is folded into the token so attribute values (globs, regexes)
  // need not be lexable Python.
  void lex_directive() {
    size_t start = pos_;
    SourcePos pos = here();
    advance();  // '$'
    if (pos_ >= src_.size() || !is_ident_start(src_[pos_]))
      throw ParseError("expected directive name after '$'", pos);
    while (pos_ < src_.size() && is_ident_cont(src_[pos_])) advance();
    if (pos_ < src_.size() && src_[pos_] == '{') {
      int depth = 0;
      char quote = '\0';
      while (pos_ < src_.size()) {
        char c = src_[pos_];
        if (quote != '\0') {
          if (c == '\\' && pos_ + 1 < src_.size()) advance();
          else if (c == quote) quote = '\0';
        } else if (c == '\'' || c == '"') {
          quote = c;
        } else if (c == '{') {
          ++depth;
        } else if (c == '}') {
          --depth;
          if (depth == 0) {
            advance();
            break;
          }
        } else if (c == '\n') {
          throw ParseError("unterminated directive attributes", pos);
        }
        advance();
      }
      if (depth != 0)
        throw ParseError("unterminated directive attributes", pos);
    }
    emit(TokKind::kDirective, start, pos);
  }

  void lex_tag_ref() {
    size_t start = pos_;
    SourcePos pos = here();
    advance();  // '#'
    while (pos_ < src_.size() && is_ident_cont(src_[pos_])) advance();
    emit(TokKind::kTagRef, start, pos);
  }

  void lex_operator() {
    SourcePos pos = here();
    for (const char* op : kOperators) {
      std::string_view sv(op);
      if (src_.substr(pos_, sv.size()) == sv) {
        size_t start = pos_;
        for (size_t i = 0; i < sv.size(); ++i) advance();
        if (sv == "(" || sv == "[" || sv == "{") ++paren_depth_;
        if (sv == ")" || sv == "]" || sv == "}")
          paren_depth_ = std::max(0, paren_depth_ - 1);
        emit(TokKind::kOp, start, pos);
        return;
      }
    }
    throw ParseError(std::string("unexpected character '") + src_[pos_] + "'",
                     pos);
  }

  void finish() {
    if (opts_.layout) {
      if (line_has_token_) emit_simple(TokKind::kNewline, "\n");
      while (indents_.size() > 1) {
        indents_.pop_back();
        emit_simple(TokKind::kDedent, "");
      }
    }
    emit_simple(TokKind::kEnd, "");
  }

  std::string_view src_;
  LexOptions opts_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int paren_depth_ = 0;
  bool line_has_token_ = false;
  std::vector<int> indents_;
  std::vector<Token> tokens_;
};

}  // namespace

std::vector<Token> lex(std::string_view source, const LexOptions& opts) {
  return Lexer(source, opts).run();
}

std::string string_token_value(const Token& token) {
  std::string_view text = token.text;
  bool raw = false;
  bool fstr = false;
  size_t i = 0;
  while (i < text.size() && text[i] != '\'' && text[i] != '"') {
    char l = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    if (l == 'r') raw = true;
    if (l == 'f') fstr = true;
    ++i;
  }
  if (i >= text.size()) return std::string(text);
  char quote = text[i];
  size_t body_start = i + 1;
  size_t body_end = text.size() - 1;
  if (text.size() >= i + 6 && text[i + 1] == quote && text[i + 2] == quote) {
    body_start = i + 3;
    body_end = text.size() - 3;
  }
  std::string_view body = text.substr(body_start, body_end - body_start);
  if (raw || fstr) return std::string(body);

  std::string out;
  out.reserve(body.size());
  for (size_t k = 0; k < body.size(); ++k) {
    char c = body[k];
    if (c != '\\' || k + 1 >= body.size()) {
      out.push_back(c);
      continue;
    }
    char e = body[++k];
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case '0': out.push_back('\0'); break;
      case 'a': out.push_back('\a'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case 'v': out.push_back('\v'); break;
      case '\\': out.push_back('\\'); break;
      case '\'': out.push_back('\''); break;
      case '"': out.push_back('"'); break;
      case '\n': break;  // line continuation inside a literal
      case 'x': {
        int v = 0;
        int digits = 0;
        while (digits < 2 && k + 1 < body.size() &&
               std::isxdigit(static_cast<unsigned char>(body[k + 1]))) {
          char h = body[++k];
          v = v * 16 + (std::isdigit(static_cast<unsigned char>(h))
                            ? h - '0'
                            : std::tolower(static_cast<unsigned char>(h)) - 'a' + 10);
          ++digits;
        }
        out.push_back(static_cast<char>(v));
        break;
      }
      default:
        out.push_back('\\');
        out.push_back(e);
    }
  }
  return out;
}

bool is_keyword(std::string_view name) {
  static const std::set<std::string_view> kKeywords = {
      "False",  "None",   "True",    "and",    "as",     "assert", "async",
      "await",  "break",  "class",   "continue", "def",  "del",    "elif",
      "else",   "except", "finally", "for",    "from",   "global", "if",
      "import", "in",     "is",      "lambda", "nonlocal", "not",  "or",
      "pass",   "raise",  "return",  "try",    "while",  "with",   "yield"};
  return kKeywords.count(name) > 0;
}

}  // namespace faultinj
