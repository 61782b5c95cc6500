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

#ifndef FAULTINJ_PY_LEXER_HPP_
#define FAULTINJ_PY_LEXER_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "faultinj/util.hpp"

namespace faultinj {

enum class TokKind {
  kName,
  kNumber,
  kString,
  kOp,
  kNewline,  // end of a logical line
  kIndent,
  kDedent,
  kDirective,  // `$NAME`, DSL mode only
  kTagRef,     // `#name`, DSL mode only
  kEnd,
};

struct Token {
  TokKind kind = TokKind::kEnd;
  std::string_view text;  // view into the lexed source
  size_t offset = 0;      // byte offset of first char
  SourcePos pos;

  size_t end_offset() const { return offset + text.size(); }
  bool is_op(std::string_view t) const { return kind == TokKind::kOp && text == t; }
  bool is_name(std::string_view t) const {
    return kind == TokKind::kName && text == t;
  }
};

struct LexOptions {
  // Emit NEWLINE/INDENT/DEDENT. Off for DSL bodies, where layout is
  // insignificant and suites are brace-delimited.
  bool layout = true;
  // Recognize `$NAME` and `#tag` tokens. In Python mode `#` starts a
  // comment and `$` is an error.
  bool dsl = false;
};

// Tokenizes Python 3 source. Comments and blank lines produce no tokens;
// original bytes stay addressable through token offsets. Throws ParseError
// on malformed input (unterminated string, inconsistent dedent, stray
// characters).
std::vector<Token> lex(std::string_view source, const LexOptions& opts = {});

// Decoded value of a string-literal token (prefix and quotes stripped,
// backslash escapes processed unless the literal is raw). f-strings and
// byte strings decode to their source body unmodified.
std::string string_token_value(const Token& token);

bool is_keyword(std::string_view name);

}  // namespace faultinj

#endif  // FAULTINJ_PY_LEXER_HPP_
