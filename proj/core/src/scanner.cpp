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

#include "faultinj/scanner.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <functional>
#include <set>
#include <thread>

#include "json.hpp"

namespace faultinj {

namespace {

using Bindings = std::map<std::string, TagBinding>;

bool is_block_element(const PatternElement& el) {
  return el.kind == PatternElement::Kind::kDirective &&
         el.directive->kind == DirectiveKind::kBlock;
}

long sat_add(long a, long b) {
  if (a > LONG_MAX / 2 || b > LONG_MAX / 2) return LONG_MAX / 2;
  return a + b;
}

bool is_open_tok(const Token& t) {
  return t.is_op("(") || t.is_op("[") || t.is_op("{");
}
bool is_close_tok(const Token& t) {
  return t.is_op(")") || t.is_op("]") || t.is_op("}");
}

NodeKind kind_for_keyword(std::string_view kw) {
  if (kw == "def") return NodeKind::kFunctionDef;
  if (kw == "class") return NodeKind::kClassDef;
  if (kw == "if") return NodeKind::kIf;
  if (kw == "for" || kw == "while") return NodeKind::kLoop;
  if (kw == "try") return NodeKind::kTry;
  if (kw == "with") return NodeKind::kWith;
  return NodeKind::kOtherCompound;
}

bool token_match(const Token& pattern_tok, const Token& code_tok) {
  if (pattern_tok.kind != code_tok.kind) return false;
  if (pattern_tok.kind == TokKind::kString)
    return string_token_value(pattern_tok) == string_token_value(code_tok);
  return pattern_tok.text == code_tok.text;
}

bool string_constraints_ok(const DirectiveSpec& dir, const std::string& value) {
  if (!dir.contains.empty() && value.find(dir.contains) == std::string::npos)
    return false;
  if (dir.match_regex && !std::regex_search(value, *dir.match_regex))
    return false;
  return true;
}

bool call_matches(const DirectiveSpec& dir, const Node& call, Bindings& b);
bool match_pieces(const std::vector<FragmentPiece>& pieces, const Token* begin,
                  const Token* end, Bindings& b);
bool match_sequence_anchored(const std::vector<PatternElement>& pattern,
                             const Node& block, Bindings& b);

void bind_expr(Bindings& b, const std::string& tag, DirectiveKind kind,
               const Token* begin, const Token* end) {
  if (tag.empty()) return;
  TagBinding binding;
  binding.kind = kind;
  binding.tok_begin = begin;
  binding.tok_end = end;
  b[tag] = std::move(binding);
}

void bind_call(Bindings& b, const std::string& tag, const Token* begin,
               const Token* end) {
  if (tag.empty()) return;
  TagBinding binding;
  binding.kind = DirectiveKind::kCall;
  binding.tok_begin = begin;
  binding.tok_end = end;
  binding.call_detail =
      std::shared_ptr<const Node>(parse_expression_range(begin, end));
  b[tag] = std::move(binding);
}

void bind_string(Bindings& b, const std::string& tag, const Node& lit) {
  if (tag.empty()) return;
  TagBinding binding;
  binding.kind = DirectiveKind::kString;
  binding.tok_begin = lit.tok_begin;
  binding.tok_end = lit.tok_end;
  binding.string_value = lit.str_value;
  b[tag] = std::move(binding);
}

// One element of a $CALL argument pattern against one argument.
bool arg_element_match(const PatternElement& el, const Node& arg,
                       Bindings& b) {
  const Node* value = arg.children.empty() ? nullptr : arg.children[0].get();
  if (el.kind == PatternElement::Kind::kDirective) {
    const DirectiveSpec& dir = *el.directive;
    switch (dir.kind) {
      case DirectiveKind::kString: {
        if (value == nullptr || value->kind != NodeKind::kStringLiteral)
          return false;
        if (!string_constraints_ok(dir, value->str_value)) return false;
        bind_string(b, dir.tag, *value);
        return true;
      }
      case DirectiveKind::kExpr: {
        const Token* vb = value ? value->tok_begin : arg.tok_begin;
        const Token* ve = value ? value->tok_end : arg.tok_end;
        bind_expr(b, dir.tag, DirectiveKind::kExpr, vb, ve);
        return true;
      }
      case DirectiveKind::kCall: {
        if (value == nullptr || value->kind != NodeKind::kCall) return false;
        if (!call_matches(dir, *value, b)) return false;
        bind_call(b, dir.tag, value->tok_begin, value->tok_end);
        return true;
      }
      default:
        return false;
    }
  }
  return match_pieces(el.pieces, arg.tok_begin, arg.tok_end, b);
}

// Argument-list pattern. `(...)` accepts anything; an empty list means a
// zero-argument call; otherwise elements bind to distinct arguments at
// strictly increasing positions (leftmost-first), extra arguments are
// allowed. This gives $STRING its "among the input parameters" meaning.
bool args_match(const DirectiveSpec& dir, const Node& call, Bindings& b) {
  if (dir.arg_mode != DirectiveSpec::ArgMode::kList) return true;
  size_t arg_count = call.children.size() - 1;  // children[0] is the callee
  if (dir.args.empty()) return arg_count == 0;

  std::function<bool(size_t, size_t, Bindings&)> rec =
      [&](size_t ei, size_t ai, Bindings& cur) -> bool {
    if (ei == dir.args.size()) return true;
    for (size_t k = ai; k < arg_count; ++k) {
      Bindings trial = cur;
      if (arg_element_match(dir.args[ei], *call.children[k + 1], trial)) {
        if (rec(ei + 1, k + 1, trial)) {
          cur = std::move(trial);
          return true;
        }
      }
    }
    return false;
  };
  return rec(0, 0, b);
}

bool call_matches(const DirectiveSpec& dir, const Node& call, Bindings& b) {
  assert(call.kind == NodeKind::kCall);
  if (!dir.name_glob.empty()) {
    if (call.name.empty()) return false;
    // Undotted globs target the function or method name itself; globs
    // with a '.' match the whole dotted callee.
    std::string_view target = call.name;
    if (dir.name_glob.find('.') == std::string::npos) {
      size_t dot = target.rfind('.');
      if (dot != std::string_view::npos) target = target.substr(dot + 1);
    }
    if (!glob_match(dir.name_glob, target)) return false;
  }
  return args_match(dir, call, b);
}

// Token-run matching with typed holes; shortest-first with backtracking.
bool match_pieces_at(const std::vector<FragmentPiece>& pieces, size_t pi,
                     const Token* t, const Token* end, Bindings& b) {
  if (pi == pieces.size()) return t == end;
  const FragmentPiece& piece = pieces[pi];
  if (!piece.is_hole) {
    if (t >= end || !token_match(piece.token, *t)) return false;
    return match_pieces_at(pieces, pi + 1, t + 1, end, b);
  }
  const DirectiveSpec& hole = *piece.hole;
  switch (hole.kind) {
    case DirectiveKind::kExpr: {
      // Any non-empty balanced run; a depth-0 ',', ':', ';' or
      // assignment operator delimits the expression.
      int depth = 0;
      for (const Token* j = t; j < end; ++j) {
        if (depth == 0) {
          if (is_close_tok(*j)) break;
          bool delimiter = j->is_op(",") || j->is_op(":") || j->is_op(";") ||
                           (j->kind == TokKind::kOp && !j->text.empty() &&
                            j->text.back() == '=' && j->text != "==" &&
                            j->text != "!=" && j->text != "<=" &&
                            j->text != ">=");
          if (delimiter && j > t) break;
          if (delimiter) return false;
        }
        if (is_open_tok(*j)) ++depth;
        if (is_close_tok(*j)) --depth;
        if (depth == 0) {
          Bindings trial = b;
          bind_expr(trial, hole.tag, DirectiveKind::kExpr, t, j + 1);
          if (match_pieces_at(pieces, pi + 1, j + 1, end, trial)) {
            b = std::move(trial);
            return true;
          }
        }
      }
      return false;
    }
    case DirectiveKind::kString: {
      if (t >= end || t->kind != TokKind::kString) return false;
      const Token* j = t;
      std::string value;
      while (j < end && j->kind == TokKind::kString) {
        value += string_token_value(*j);
        ++j;
      }
      if (!string_constraints_ok(hole, value)) return false;
      Bindings trial = b;
      if (!hole.tag.empty()) {
        TagBinding binding;
        binding.kind = DirectiveKind::kString;
        binding.tok_begin = t;
        binding.tok_end = j;
        binding.string_value = value;
        trial[hole.tag] = std::move(binding);
      }
      if (match_pieces_at(pieces, pi + 1, j, end, trial)) {
        b = std::move(trial);
        return true;
      }
      return false;
    }
    case DirectiveKind::kCall: {
      const Token* j = skip_primary(t, end);
      if (j == nullptr) return false;
      NodeUp node = parse_expression_range(t, j);
      if (!node || node->kind != NodeKind::kCall) return false;
      Bindings trial = b;
      if (!call_matches(hole, *node, trial)) return false;
      bind_call(trial, hole.tag, t, j);
      if (match_pieces_at(pieces, pi + 1, j, end, trial)) {
        b = std::move(trial);
        return true;
      }
      return false;
    }
    default:
      return false;  // replacement-side directives never match
  }
}

bool match_pieces(const std::vector<FragmentPiece>& pieces, const Token* begin,
                  const Token* end, Bindings& b) {
  return match_pieces_at(pieces, 0, begin, end, b);
}

bool stmt_matches(const PatternElement& el, const Node& stmt, Bindings& b) {
  if (el.kind == PatternElement::Kind::kDirective) {
    const DirectiveSpec& dir = *el.directive;
    switch (dir.kind) {
      case DirectiveKind::kCall: {
        // Only statements where the call is the outermost construct.
        if (stmt.kind != NodeKind::kExpressionStmt || stmt.children.empty())
          return false;
        const Node& expr = *stmt.children[0];
        if (expr.kind != NodeKind::kCall) return false;
        Bindings trial = b;
        if (!call_matches(dir, expr, trial)) return false;
        bind_call(trial, dir.tag, expr.tok_begin, expr.tok_end);
        b = std::move(trial);
        return true;
      }
      case DirectiveKind::kExpr: {
        if (stmt.kind != NodeKind::kExpressionStmt) return false;
        bind_expr(b, dir.tag, DirectiveKind::kExpr, stmt.tok_begin,
                  stmt.tok_end);
        return true;
      }
      case DirectiveKind::kString: {
        if (stmt.kind != NodeKind::kExpressionStmt || stmt.children.empty())
          return false;
        const Node& expr = *stmt.children[0];
        if (expr.kind != NodeKind::kStringLiteral) return false;
        if (!string_constraints_ok(dir, expr.str_value)) return false;
        bind_string(b, dir.tag, expr);
        return true;
      }
      default:
        return false;
    }
  }

  if (!el.compound) {
    if (!stmt.is_simple_statement()) return false;
    if (stmt.kind != el.stmt_kind) return false;
    return match_pieces(el.pieces, stmt.tok_begin, stmt.tok_end, b);
  }

  // Compound fragment: clause kinds, headers and suites must all line up.
  if (!stmt.is_compound_statement()) return false;
  if (stmt.kind != kind_for_keyword(el.clauses[0].keyword)) return false;
  if (stmt.children.size() != el.clauses.size()) return false;
  Bindings trial = b;
  for (size_t i = 0; i < el.clauses.size(); ++i) {
    const ClausePattern& pc = el.clauses[i];
    const Node& clause = *stmt.children[i];
    if (clause.name != pc.keyword) return false;
    const Token* hb = clause.tok_begin;
    const Token* he = clause.tok_begin + clause.header_end;
    if (!match_pieces(pc.header, hb, he, trial)) return false;
    if (!match_sequence_anchored(pc.body, *clause.children[0], trial))
      return false;
  }
  b = std::move(trial);
  return true;
}

// --- statement-sequence matching ----------------------------------------

struct BlockSplit {
  std::vector<int> lengths;
};

long sum_min(const std::vector<const DirectiveSpec*>& blocks) {
  long s = 0;
  for (const auto* d : blocks) s = sat_add(s, d->min);
  return s;
}
long sum_max(const std::vector<const DirectiveSpec*>& blocks) {
  long s = 0;
  for (const auto* d : blocks) s = sat_add(s, d->max);
  return s;
}

// Lexicographically-minimal feasible split of `total` across blocks.
bool split_min_first(const std::vector<const DirectiveSpec*>& blocks,
                     long total, std::vector<int>& out) {
  if (total < sum_min(blocks) || total > sum_max(blocks)) return false;
  out.clear();
  long rest = total;
  for (size_t i = 0; i < blocks.size(); ++i) {
    std::vector<const DirectiveSpec*> tail(blocks.begin() + i + 1,
                                           blocks.end());
    long take = std::max<long>(blocks[i]->min, rest - sum_max(tail));
    out.push_back(static_cast<int>(take));
    rest -= take;
  }
  return rest == 0;
}

// Maximal-total split for boundary blocks: outermost blocks absorb the
// extra span first. `outermost_first` selects which end gets the slack.
bool split_boundary(const std::vector<const DirectiveSpec*>& blocks,
                    long avail, bool anchored, bool extras_leftmost,
                    long& total_out, std::vector<int>& out) {
  long total = anchored ? avail : std::min(avail, sum_max(blocks));
  if (total < sum_min(blocks) || total > sum_max(blocks)) return false;
  out.assign(blocks.size(), 0);
  long rest = total;
  if (extras_leftmost) {
    for (size_t i = 0; i < blocks.size(); ++i) {
      std::vector<const DirectiveSpec*> tail(blocks.begin() + i + 1,
                                             blocks.end());
      long take = std::min<long>(blocks[i]->max, rest - sum_min(tail));
      out[i] = static_cast<int>(take);
      rest -= take;
    }
  } else {
    for (size_t ri = blocks.size(); ri-- > 0;) {
      std::vector<const DirectiveSpec*> head(blocks.begin(),
                                             blocks.begin() + ri);
      long take = std::min<long>(blocks[ri]->max, rest - sum_min(head));
      out[ri] = static_cast<int>(take);
      rest -= take;
    }
  }
  if (rest != 0) return false;
  total_out = total;
  return true;
}

struct WindowMatch {
  int first = 0;
  int last = 0;
  Bindings bindings;
};

class SequenceMatcher {
 public:
  // `floor`: lowest statement index windows may reach (used to keep the
  // module prologue out of matches).
  SequenceMatcher(const std::vector<PatternElement>& pattern,
                  const Node& block, bool anchored, int floor = 0)
      : pattern_(pattern), block_(block), anchored_(anchored),
        floor_(floor) {
    for (size_t i = 0; i < pattern.size(); ++i)
      if (!is_block_element(pattern[i])) anchors_.push_back(i);
  }

  void run(std::vector<WindowMatch>& out, bool first_only) {
    n_ = static_cast<int>(block_.children.size());
    if (anchors_.empty()) {
      all_blocks(out);
      return;
    }
    std::vector<int> positions;
    Bindings b;
    place(0, floor_ - 1, positions, b, out, first_only);
  }

 private:
  const Node& stmt(int i) const { return *block_.children[i]; }

  std::vector<const DirectiveSpec*> blocks_between(size_t from_el,
                                                   size_t to_el) const {
    std::vector<const DirectiveSpec*> out;
    for (size_t i = from_el; i < to_el; ++i)
      out.push_back(pattern_[i].directive.get());
    return out;
  }

  void all_blocks(std::vector<WindowMatch>& out) {
    // Boundary absorption applies to the whole pattern: the leftmost
    // block soaks up the slack first.
    auto blocks = blocks_between(0, pattern_.size());
    std::vector<int> split;
    long total = 0;
    if (!split_boundary(blocks, n_ - floor_, /*anchored=*/true,
                        /*extras_leftmost=*/true, total, split))
      return;
    WindowMatch m;
    m.first = floor_;
    m.last = n_;
    int cursor = floor_;
    for (size_t i = 0; i < blocks.size(); ++i) {
      record_block_binding(m.bindings, *blocks[i], cursor, cursor + split[i]);
      cursor += split[i];
    }
    out.push_back(std::move(m));
  }

  void record_block_binding(Bindings& b, const DirectiveSpec& dir, int first,
                            int last) const {
    if (dir.tag.empty()) return;
    TagBinding binding;
    binding.kind = DirectiveKind::kBlock;
    binding.block = &block_;
    binding.stmt_first = first;
    binding.stmt_last = last;
    b[dir.tag] = std::move(binding);
  }

  void place(size_t ai, int prev_pos, std::vector<int>& positions, Bindings& b,
             std::vector<WindowMatch>& out, bool first_only) {
    if (!out.empty() && first_only) return;
    size_t el_from = ai == 0 ? 0 : anchors_[ai - 1] + 1;
    size_t el_to = anchors_[ai];
    auto gap_blocks = blocks_between(el_from, el_to);

    int lo, hi;
    if (ai == 0) {
      long smin = sum_min(gap_blocks);
      long smax = sum_max(gap_blocks);
      lo = static_cast<int>(std::min<long>(floor_ + smin, n_));
      hi = anchored_ ? static_cast<int>(std::min<long>(floor_ + smax, n_ - 1))
                     : n_ - 1;
    } else if (gap_blocks.empty()) {
      lo = hi = prev_pos + 1;
    } else {
      lo = static_cast<int>(
          std::min<long>(prev_pos + 1 + sum_min(gap_blocks), n_));
      hi = static_cast<int>(
          std::min<long>(prev_pos + 1 + sum_max(gap_blocks), n_ - 1));
    }
    for (int p = lo; p <= hi && p < n_; ++p) {
      Bindings trial = b;
      if (!stmt_matches(pattern_[anchors_[ai]], stmt(p), trial)) continue;
      // Bind inner gap blocks (sizes fully determined by positions).
      if (ai > 0 && !gap_blocks.empty()) {
        long gap = p - prev_pos - 1;
        std::vector<int> split;
        if (!split_min_first(gap_blocks, gap, split)) continue;
        int cursor = prev_pos + 1;
        for (size_t i = 0; i < gap_blocks.size(); ++i) {
          record_block_binding(trial, *gap_blocks[i], cursor,
                               cursor + split[i]);
          cursor += split[i];
        }
      }
      positions.push_back(p);
      if (ai + 1 < anchors_.size()) {
        place(ai + 1, p, positions, trial, out, first_only);
      } else {
        finish(positions, trial, out);
      }
      positions.pop_back();
      if (!out.empty() && first_only) return;
    }
  }

  void finish(const std::vector<int>& positions, Bindings b,
              std::vector<WindowMatch>& out) {
    int p_first = positions.front();
    int p_last = positions.back();

    auto leading = blocks_between(0, anchors_.front());
    long lead_total = 0;
    std::vector<int> lead_split;
    if (!leading.empty()) {
      if (!split_boundary(leading, p_first - floor_, anchored_,
                          /*extras_leftmost=*/true, lead_total, lead_split))
        return;
    } else if (anchored_ && p_first != floor_) {
      return;
    }

    auto trailing = blocks_between(anchors_.back() + 1, pattern_.size());
    long trail_total = 0;
    std::vector<int> trail_split;
    long avail = n_ - 1 - p_last;
    if (!trailing.empty()) {
      if (!split_boundary(trailing, avail, anchored_,
                          /*extras_leftmost=*/false, trail_total, trail_split))
        return;
    } else if (anchored_ && avail != 0) {
      return;
    }

    WindowMatch m;
    m.first = static_cast<int>(p_first - lead_total);
    m.last = static_cast<int>(p_last + 1 + trail_total);
    m.bindings = std::move(b);
    int cursor = m.first;
    for (size_t i = 0; i < leading.size(); ++i) {
      record_block_binding(m.bindings, *leading[i], cursor,
                           cursor + lead_split[i]);
      cursor += lead_split[i];
    }
    cursor = p_last + 1;
    for (size_t i = 0; i < trailing.size(); ++i) {
      record_block_binding(m.bindings, *trailing[i], cursor,
                           cursor + trail_split[i]);
      cursor += trail_split[i];
    }
    out.push_back(std::move(m));
  }

  const std::vector<PatternElement>& pattern_;
  const Node& block_;
  bool anchored_;
  int floor_ = 0;
  std::vector<size_t> anchors_;
  int n_ = 0;
};

bool match_sequence_anchored(const std::vector<PatternElement>& pattern,
                             const Node& block, Bindings& b) {
  SequenceMatcher matcher(pattern, block, /*anchored=*/true);
  std::vector<WindowMatch> out;
  matcher.run(out, /*first_only=*/true);
  if (out.empty()) return false;
  for (auto& [tag, binding] : out.front().bindings) b[tag] = binding;
  return true;
}

}  // namespace

bool match_statement_pattern(const PatternElement& element, const Node& stmt,
                             std::map<std::string, TagBinding>& bindings) {
  return stmt_matches(element, stmt, bindings);
}

std::vector<Match> find_matches(const ProgramTree& tree,
                                const MetaModel& model) {
  std::vector<Match> matches;
  std::vector<BlockRef> blocks = enumerate_blocks(tree);
  int prologue = module_prologue_length(tree);
  for (size_t bi = 0; bi < blocks.size(); ++bi) {
    const Node& block = *blocks[bi].block;
    int floor = bi == 0 ? prologue : 0;
    SequenceMatcher matcher(model.pattern_tree, block, /*anchored=*/false,
                            floor);
    std::vector<WindowMatch> wins;
    matcher.run(wins, /*first_only=*/false);
    std::set<std::pair<int, int>> seen;
    for (auto& w : wins) {
      if (!seen.insert({w.first, w.last}).second) continue;
      Match m;
      m.file = tree.path();
      m.block = &block;
      m.block_index = static_cast<int>(bi);
      m.first = w.first;
      m.last = w.last;
      m.bindings = std::move(w.bindings);
      m.spec_name = model.spec_name;
      matches.push_back(std::move(m));
    }
  }
  std::stable_sort(matches.begin(), matches.end(),
                   [](const Match& a, const Match& b) {
                     if (a.block_index != b.block_index)
                       return a.block_index < b.block_index;
                     if (a.first != b.first) return a.first < b.first;
                     return a.last < b.last;
                   });
  return matches;
}

std::string ComponentMap::component_for(const std::string& rel_path) const {
  const std::string* best = nullptr;
  size_t best_len = 0;
  for (const auto& [prefix, name] : prefixes) {
    if (rel_path.size() >= prefix.size() &&
        rel_path.compare(0, prefix.size(), prefix) == 0 &&
        prefix.size() >= best_len) {
      best = &name;
      best_len = prefix.size();
    }
  }
  if (best != nullptr) return *best;
  size_t slash = rel_path.find('/');
  if (slash == std::string::npos) return ".";
  return rel_path.substr(0, slash);
}

std::string point_id(const std::string& file, int block_index, int first,
                     int last, const std::string& spec_name) {
  uint64_t h = fnv1a64(file);
  std::string key = ":" + std::to_string(block_index) + ":" +
                    std::to_string(first) + ":" + std::to_string(last) + ":";
  h = fnv1a64_mix(h, key);
  h = fnv1a64_mix(h, spec_name);
  return to_hex(h);
}

namespace {

std::vector<std::filesystem::path> python_files(
    const std::filesystem::path& root) {
  std::vector<std::filesystem::path> files;
  for (auto it = std::filesystem::recursive_directory_iterator(root);
       it != std::filesystem::recursive_directory_iterator(); ++it) {
    if (it->is_directory()) {
      std::string name = it->path().filename().string();
      if (name == "__pycache__" || (name.size() > 1 && name[0] == '.'))
        it.disable_recursion_pending();
      continue;
    }
    if (it->is_regular_file() && it->path().extension() == ".py")
      files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string rel_posix(const std::filesystem::path& root,
                      const std::filesystem::path& file) {
  return std::filesystem::relative(file, root).generic_string();
}

}  // namespace

std::string project_fingerprint(const std::filesystem::path& root) {
  uint64_t h = fnv1a64("faultinj-project");
  for (const auto& file : python_files(root)) {
    h = fnv1a64_mix(h, rel_posix(root, file));
    h = fnv1a64_mix(h, read_file(file));
  }
  return to_hex(h);
}

ScanResult scan_project(const std::filesystem::path& root,
                        const std::vector<MetaModel>& models,
                        const ComponentMap& components, int max_workers) {
  if (!std::filesystem::is_directory(root))
    throw std::runtime_error("project root does not exist: " + root.string());

  std::vector<std::filesystem::path> files = python_files(root);
  std::vector<std::vector<InjectionPoint>> per_file(files.size());
  std::vector<SkipRecord> skipped_slots(files.size());
  std::vector<char> skipped_flag(files.size(), 0);

  int workers = max_workers > 0
                    ? max_workers
                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<int>(workers, std::max<size_t>(files.size(), 1));

  std::atomic<size_t> next{0};
  auto work = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      std::string rel = rel_posix(root, files[i]);
      try {
        ProgramTree tree = parse_source(read_file(files[i]), rel);
        std::string component = components.component_for(rel);
        for (const MetaModel& model : models) {
          for (const Match& m : find_matches(tree, model)) {
            InjectionPoint p;
            p.id = point_id(rel, m.block_index, m.first, m.last, m.spec_name);
            p.file = rel;
            p.line_start = m.line_start();
            p.line_end = m.line_end();
            p.spec_name = m.spec_name;
            p.component = component;
            per_file[i].push_back(std::move(p));
          }
        }
      } catch (const std::exception& e) {
        skipped_slots[i] = {rel, e.what()};
        skipped_flag[i] = 1;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ScanResult result;
  for (size_t i = 0; i < files.size(); ++i) {
    for (auto& p : per_file[i]) result.points.push_back(std::move(p));
    if (skipped_flag[i]) result.skipped.push_back(skipped_slots[i]);
  }
  std::stable_sort(result.points.begin(), result.points.end(),
                   [](const InjectionPoint& a, const InjectionPoint& b) {
                     if (a.file != b.file) return a.file < b.file;
                     if (a.line_start != b.line_start)
                       return a.line_start < b.line_start;
                     return a.spec_name < b.spec_name;
                   });
  result.project_fingerprint = project_fingerprint(root);
  return result;
}

InjectionPlan build_plan(const ScanResult& scan, const Selection& selection) {
  InjectionPlan plan;
  plan.project_fingerprint = scan.project_fingerprint;
  switch (selection.mode) {
    case Selection::Mode::kAll:
      plan.selection_note = "selection=ALL";
      plan.points = scan.points;
      break;
    case Selection::Mode::kFileGlob:
      plan.selection_note = "selection=FILE_GLOB glob=" + selection.argument;
      for (const auto& p : scan.points)
        if (path_glob_match(selection.argument, p.file))
          plan.points.push_back(p);
      break;
    case Selection::Mode::kComponent:
      plan.selection_note = "selection=COMPONENT name=" + selection.argument;
      for (const auto& p : scan.points)
        if (p.component == selection.argument) plan.points.push_back(p);
      break;
    case Selection::Mode::kSample: {
      plan.selection_note = "selection=SAMPLE n=" +
                            std::to_string(selection.sample_n) +
                            " seed=" + std::to_string(selection.seed);
      size_t n = scan.points.size();
      size_t k = std::min(selection.sample_n, n);
      // Partial Fisher-Yates with an explicit generator, so identical
      // seeds produce identical plans on any platform.
      std::vector<size_t> idx(n);
      for (size_t i = 0; i < n; ++i) idx[i] = i;
      uint64_t state = selection.seed * 6364136223846793005ull + 1442695040888963407ull;
      auto next_rand = [&state]() {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return state * 2685821657736338717ull;
      };
      for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(next_rand() % (n - i));
        std::swap(idx[i], idx[j]);
      }
      idx.resize(k);
      std::sort(idx.begin(), idx.end());
      for (size_t i : idx) plan.points.push_back(scan.points[i]);
      break;
    }
  }
  return plan;
}

void save_plan(const InjectionPlan& plan, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["format_version"] = plan.format_version;
  doc["project_fingerprint"] = plan.project_fingerprint;
  doc["selection_note"] = plan.selection_note;
  doc["points"] = nlohmann::ordered_json::array();
  for (const auto& p : plan.points) {
    doc["points"].push_back({{"id", p.id},
                             {"file", p.file},
                             {"line_start", p.line_start},
                             {"line_end", p.line_end},
                             {"spec_name", p.spec_name},
                             {"component", p.component}});
  }
  write_file(path, doc.dump(2) + "\n");
}

InjectionPlan load_plan(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("plan " + path.string() +
                             " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version") ||
      doc["format_version"].get<int>() != 1)
    throw std::runtime_error("plan schema violation at /format_version");
  InjectionPlan plan;
  plan.project_fingerprint = doc.value("project_fingerprint", "");
  plan.selection_note = doc.value("selection_note", "");
  if (!doc.contains("points") || !doc["points"].is_array())
    throw std::runtime_error("plan schema violation at /points");
  for (size_t i = 0; i < doc["points"].size(); ++i) {
    const auto& e = doc["points"][i];
    std::string at = "/points/" + std::to_string(i);
    for (const char* key : {"id", "file", "spec_name", "component"})
      if (!e.contains(key) || !e[key].is_string())
        throw std::runtime_error("plan schema violation at " + at + "/" + key);
    InjectionPoint p;
    p.id = e["id"].get<std::string>();
    p.file = e["file"].get<std::string>();
    p.line_start = e.value("line_start", 0);
    p.line_end = e.value("line_end", 0);
    p.spec_name = e["spec_name"].get<std::string>();
    p.component = e["component"].get<std::string>();
    plan.points.push_back(std::move(p));
  }
  return plan;
}

std::optional<Match> recover_match(const ProgramTree& tree,
                                   const MetaModel& model,
                                   const InjectionPoint& point) {
  for (Match& m : find_matches(tree, model)) {
    if (point_id(point.file, m.block_index, m.first, m.last, m.spec_name) ==
        point.id)
      return std::move(m);
  }
  return std::nullopt;
}

}  // namespace faultinj
