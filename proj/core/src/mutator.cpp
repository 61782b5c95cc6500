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

#include "faultinj/mutator.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace faultinj {

namespace {

struct TextEdit {
  size_t begin;
  size_t end;  // begin == end: pure insertion
  std::string text;
};

std::string apply_edits(std::string_view source, std::vector<TextEdit> edits) {
  std::stable_sort(edits.begin(), edits.end(),
                   [](const TextEdit& a, const TextEdit& b) {
                     return a.begin < b.begin;
                   });
  std::string out;
  out.reserve(source.size() + 256);
  size_t cursor = 0;
  for (const TextEdit& edit : edits) {
    if (edit.begin < cursor)
      throw std::logic_error("overlapping text edits");
    out.append(source.substr(cursor, edit.begin - cursor));
    out.append(edit.text);
    cursor = edit.end;
  }
  out.append(source.substr(cursor));
  return out;
}

size_t line_start_of(std::string_view src, size_t offset) {
  if (offset == 0) return 0;
  size_t nl = src.rfind('\n', offset - 1);
  return nl == std::string_view::npos ? 0 : nl + 1;
}

bool blank_prefix(std::string_view src, size_t from, size_t to) {
  for (size_t i = from; i < to; ++i)
    if (src[i] != ' ' && src[i] != '\t') return false;
  return true;
}

// Byte ranges of string-literal tokens; newlines inside them must keep
// their exact bytes when a window is re-indented.
std::vector<std::pair<size_t, size_t>> string_ranges(const ProgramTree& tree,
                                                     size_t from, size_t to) {
  std::vector<std::pair<size_t, size_t>> out;
  for (const Token& t : tree.tokens()) {
    if (t.kind != TokKind::kString) continue;
    if (t.end_offset() <= from) continue;
    if (t.offset >= to) break;
    out.emplace_back(t.offset, t.end_offset());
  }
  return out;
}

bool inside_any(const std::vector<std::pair<size_t, size_t>>& ranges,
                size_t pos) {
  for (auto [b, e] : ranges)
    if (pos >= b && pos < e) return true;
  return false;
}

// ---- replacement template rendering -------------------------------------

class ReplacementRenderer {
 public:
  ReplacementRenderer(const ProgramTree& tree, const Match& match,
                      const MetaModel& model, uint64_t rng_seed)
      : tree_(tree), match_(match), model_(model), seed_(rng_seed) {}

  // Each chunk is one rendered statement, possibly multi-line, carrying
  // absolute indentation, without a trailing newline.
  std::vector<std::string> render(int indent) {
    std::vector<std::string> chunks;
    for (const PatternElement& el : model_.replacement_template)
      render_element(el, indent, chunks);
    return chunks;
  }

 private:
  [[noreturn]] void bail(const std::string& msg) const {
    throw std::runtime_error("spec '" + model_.spec_name + "': " + msg);
  }

  const TagBinding& binding(const std::string& tag) const {
    auto it = match_.bindings.find(tag);
    if (it == match_.bindings.end()) bail("unbound tag " + tag);
    return it->second;
  }

  void render_element(const PatternElement& el, int indent,
                      std::vector<std::string>& chunks) {
    std::string pad(indent, ' ');
    if (el.kind == PatternElement::Kind::kDirective) {
      const DirectiveSpec& dir = *el.directive;
      switch (dir.kind) {
        case DirectiveKind::kTagRef:
        case DirectiveKind::kBlock:
        case DirectiveKind::kCall:
        case DirectiveKind::kExpr:
        case DirectiveKind::kString: {
          const TagBinding& b = binding(dir.tag);
          if (b.kind == DirectiveKind::kBlock) {
            chunks.push_back(render_statement_window(
                tree_, *b.block, b.stmt_first, b.stmt_last, indent));
          } else if (b.kind == DirectiveKind::kCall &&
                     dir.kind == DirectiveKind::kCall &&
                     dir.arg_mode == DirectiveSpec::ArgMode::kList) {
            chunks.push_back(pad + render_call_override(dir, b));
          } else {
            chunks.push_back(pad +
                             render_tokens(b.tok_begin, b.tok_end));
          }
          return;
        }
        case DirectiveKind::kHog:
          chunks.push_back(pad + "_faultinj_runtime.fi_hog(" +
                           std::to_string(dir.threads) + ")");
          return;
        case DirectiveKind::kTimeout:
          chunks.push_back(pad + "_faultinj_runtime.fi_sleep(" +
                           std::to_string(dir.ms) + ")");
          return;
        case DirectiveKind::kCorrupt:
          chunks.push_back(pad + render_directive_expr(dir));
          return;
      }
    }
    if (!el.compound) {
      chunks.push_back(pad + render_piece_seq(el.pieces));
      return;
    }
    std::string chunk;
    for (size_t i = 0; i < el.clauses.size(); ++i) {
      const ClausePattern& clause = el.clauses[i];
      if (i > 0) chunk += "\n";
      chunk += pad + render_piece_seq(clause.header) + ":";
      std::vector<std::string> body;
      for (const PatternElement& sub : clause.body)
        render_element(sub, indent + 4, body);
      if (body.empty()) body.push_back(pad + "    pass");
      for (const std::string& b : body) chunk += "\n" + b;
    }
    chunks.push_back(std::move(chunk));
  }

  std::string render_piece_seq(const std::vector<FragmentPiece>& pieces) {
    std::string out;
    for (const FragmentPiece& piece : pieces) {
      std::string text;
      if (piece.is_hole) {
        text = render_directive_expr(*piece.hole);
      } else {
        text = std::string(piece.token.text);
      }
      if (!out.empty() && !text.empty()) {
        char prev = out.back();
        char next = text.front();
        bool tight = prev == '(' || prev == '[' || prev == '{' ||
                     prev == '.' || next == ')' || next == ']' ||
                     next == '}' || next == ',' || next == ':' ||
                     next == '.' || next == '(' || next == '[';
        // keep keywords separated: `not(x)` is fine but `del(x)` reads
        // poorly; a single space before '(' after a close is dropped.
        if (next == '(' || next == '[') {
          bool word = std::isalnum(static_cast<unsigned char>(prev)) ||
                      prev == '_' || prev == ')' || prev == ']';
          tight = word;
        }
        if (!tight) out.push_back(' ');
      }
      out += text;
    }
    return out;
  }

  std::string render_directive_expr(const DirectiveSpec& dir) {
    switch (dir.kind) {
      case DirectiveKind::kTagRef:
      case DirectiveKind::kExpr:
      case DirectiveKind::kString:
      case DirectiveKind::kCall: {
        const TagBinding& b = binding(dir.tag);
        if (b.kind == DirectiveKind::kBlock)
          bail("tag " + dir.tag + " binds statements, not an expression");
        if (b.kind == DirectiveKind::kCall &&
            dir.kind == DirectiveKind::kCall &&
            dir.arg_mode == DirectiveSpec::ArgMode::kList)
          return render_call_override(dir, b);
        return render_tokens(b.tok_begin, b.tok_end);
      }
      case DirectiveKind::kCorrupt: {
        if (dir.args.size() != 1)
          bail("$CORRUPT takes exactly one argument");
        std::string inner = render_arg_element(dir.args[0]);
        long seed = dir.seed ? *dir.seed : static_cast<long>(seed_);
        std::string out = "_faultinj_runtime.fi_corrupt(" + inner + ", " +
                          std::to_string(seed);
        if (dir.corrupt_mode != "random")
          out += ", \"" + dir.corrupt_mode + "\"";
        return out + ")";
      }
      case DirectiveKind::kHog:
        return "_faultinj_runtime.fi_hog(" + std::to_string(dir.threads) +
               ")";
      case DirectiveKind::kTimeout:
        return "_faultinj_runtime.fi_sleep(" + std::to_string(dir.ms) + ")";
      default:
        bail("directive cannot be rendered in an expression");
    }
  }

  std::string render_arg_element(const PatternElement& el) {
    if (el.kind == PatternElement::Kind::kDirective)
      return render_directive_expr(*el.directive);
    return render_piece_seq(el.pieces);
  }

  // Every tag referenced inside `el`, in traversal order.
  void collect_ref_tags(const PatternElement& el,
                        std::vector<std::string>& out) const {
    auto from_dir = [&](const DirectiveSpec& d, auto&& self) -> void {
      if (!d.tag.empty()) out.push_back(d.tag);
      for (const PatternElement& arg : d.args) {
        if (arg.kind == PatternElement::Kind::kDirective) {
          self(*arg.directive, self);
        } else {
          for (const FragmentPiece& p : arg.pieces)
            if (p.is_hole) self(*p.hole, self);
        }
      }
    };
    if (el.kind == PatternElement::Kind::kDirective) {
      from_dir(*el.directive, from_dir);
    } else {
      for (const FragmentPiece& p : el.pieces)
        if (p.is_hole) from_dir(*p.hole, from_dir);
    }
  }

  // `$CALL#c(override...)`: re-emit the bound call, replacing each
  // argument whose bound subexpression is referenced by an override
  // element; unreferenced arguments pass through verbatim.
  std::string render_call_override(const DirectiveSpec& dir,
                                   const TagBinding& bound) {
    const Node& call = *bound.call_detail;
    size_t arg_count = call.children.size() - 1;
    std::vector<std::string> rendered(arg_count);
    std::vector<bool> overridden(arg_count, false);
    for (size_t i = 0; i < arg_count; ++i) {
      const Node& arg = *call.children[i + 1];
      rendered[i] = render_tokens(arg.tok_begin, arg.tok_end);
    }
    for (const PatternElement& el : dir.args) {
      std::vector<std::string> tags;
      collect_ref_tags(el, tags);
      bool placed = false;
      for (const std::string& tag : tags) {
        auto it = match_.bindings.find(tag);
        if (it == match_.bindings.end()) continue;
        const TagBinding& tb = it->second;
        if (tb.tok_begin == nullptr) continue;
        for (size_t i = 0; i < arg_count; ++i) {
          const Node& arg = *call.children[i + 1];
          if (tb.tok_begin >= arg.tok_begin && tb.tok_end <= arg.tok_end) {
            rendered[i] = render_arg_element(el);
            overridden[i] = true;
            placed = true;
            break;
          }
        }
        if (placed) break;
      }
      if (!placed)
        bail("replacement argument does not reference a bound argument of "
             "the call");
    }
    const Node& callee = *call.children[0];
    std::string out = render_tokens(callee.tok_begin, callee.tok_end);
    out += "(";
    for (size_t i = 0; i < arg_count; ++i) {
      if (i > 0) out += ", ";
      out += rendered[i];
    }
    out += ")";
    return out;
  }

  const ProgramTree& tree_;
  const Match& match_;
  const MetaModel& model_;
  uint64_t seed_;
};

// Offset where the helper import goes: after the module prologue
// (docstring and __future__ imports), which matching also never touches.
size_t import_offset(const ProgramTree& tree) {
  const Node& module_block = *tree.root().children[0];
  std::string_view src = tree.source();
  int prologue = module_prologue_length(tree);
  if (prologue < static_cast<int>(module_block.children.size()))
    return line_start_of(src,
                         module_block.children[prologue]->start_offset());
  size_t offset = module_block.children.empty()
                      ? 0
                      : module_block.children.back()->end_offset();
  while (offset < src.size() && src[offset] != '\n') ++offset;
  if (offset < src.size()) ++offset;
  return offset;
}

TextEdit import_edit(const ProgramTree& tree) {
  size_t off = import_offset(tree);
  std::string text = kHelperImportLine;
  std::string_view src = tree.source();
  if (off == src.size() && !src.empty() && src.back() != '\n')
    text = "\n" + text;
  return TextEdit{off, off, text};
}

struct CutRegion {
  size_t begin = 0;
  size_t end = 0;
  bool at_line_start = false;
  bool consumed_line_end = false;
  std::string indent;  // insertion indent for replacement lines
};

CutRegion compute_cut(const ProgramTree& tree, const Match& match) {
  std::string_view src = tree.source();
  const Node& first_stmt = *match.block->children[match.first];
  const Node& last_stmt = *match.block->children[match.last - 1];

  CutRegion cut;
  size_t s = first_stmt.start_offset();
  size_t ls = line_start_of(src, s);
  cut.at_line_start = blank_prefix(src, ls, s);
  cut.begin = cut.at_line_start ? ls : s;
  if (cut.at_line_start) {
    cut.indent = std::string(src.substr(ls, s - ls));
  } else {
    // Mid-line window (inline suite): open a fresh suite one level in.
    size_t indent_end = ls;
    while (indent_end < src.size() &&
           (src[indent_end] == ' ' || src[indent_end] == '\t'))
      ++indent_end;
    cut.indent = std::string(src.substr(ls, indent_end - ls)) + "    ";
  }

  size_t e = last_stmt.end_offset();
  while (e < src.size() && (src[e] == ' ' || src[e] == '\t')) ++e;
  if (e < src.size() && src[e] == ';') {
    ++e;
    while (e < src.size() && (src[e] == ' ' || src[e] == '\t')) ++e;
  }
  if (e >= src.size() || src[e] == '\n' || src[e] == '\r' || src[e] == '#') {
    while (e < src.size() && src[e] != '\n') ++e;
    if (e < src.size()) ++e;
    cut.consumed_line_end = true;
  }
  cut.end = e;
  return cut;
}

bool window_is_whole_block(const Match& match) {
  return match.first == 0 &&
         match.last == static_cast<int>(match.block->children.size());
}

bool block_is_module_body(const ProgramTree& tree, const Node& block) {
  return tree.root().children[0].get() == &block;
}

std::string splice(const ProgramTree& tree, const Match& match,
                   const std::vector<std::string>& chunks) {
  const CutRegion cut = compute_cut(tree, match);
  std::string_view src = tree.source();

  std::string body;
  if (!chunks.empty()) {
    if (!cut.at_line_start) body += "\n";
    for (const std::string& chunk : chunks) {
      body += chunk;
      body += "\n";
    }
    if (!cut.consumed_line_end) body += cut.indent;
  } else {
    if (!cut.consumed_line_end && cut.at_line_start) body += cut.indent;
    if (cut.consumed_line_end && !cut.at_line_start) body += "\n";
  }

  std::vector<TextEdit> edits;
  edits.push_back(import_edit(tree));
  edits.push_back(TextEdit{cut.begin, cut.end, body});
  return apply_edits(src, std::move(edits));
}

}  // namespace

std::string render_statement_window(const ProgramTree& tree,
                                    const Node& block, int first, int last,
                                    int target_indent) {
  assert(first < last);
  std::string_view src = tree.source();
  const Node& first_stmt = *block.children[first];
  const Node& last_stmt = *block.children[last - 1];
  size_t from = first_stmt.start_offset();
  size_t to = last_stmt.end_offset();

  size_t ls = line_start_of(src, from);
  int orig_indent = static_cast<int>(from - ls);
  int delta = target_indent - orig_indent;
  auto strings = string_ranges(tree, from, to);

  std::string out(static_cast<size_t>(target_indent), ' ');
  for (size_t i = from; i < to; ++i) {
    char c = src[i];
    out.push_back(c);
    if (c == '\n' && !inside_any(strings, i)) {
      if (delta > 0) {
        out.append(static_cast<size_t>(delta), ' ');
      } else {
        int remove = -delta;
        while (remove > 0 && i + 1 < to && src[i + 1] == ' ') {
          ++i;
          --remove;
        }
      }
    }
  }
  return out;
}

std::vector<std::string> apply_replacement(const ProgramTree& tree,
                                           const Match& match,
                                           const MetaModel& model,
                                           uint64_t rng_seed) {
  ReplacementRenderer renderer(tree, match, model, rng_seed);
  return renderer.render(0);
}

MutantSource generate_mutant(const ProgramTree& tree, const Match& match,
                             const MetaModel& model, MutantMode mode,
                             const TriggerChannel& trigger,
                             uint64_t rng_seed) {
  assert(mode == MutantMode::kPlain || mode == MutantMode::kTriggered);
  ReplacementRenderer renderer(tree, match, model, rng_seed);
  const CutRegion cut = compute_cut(tree, match);
  int indent = static_cast<int>(cut.indent.size());

  std::vector<std::string> chunks;
  std::string point =
      point_id(tree.path(), match.block_index, match.first, match.last,
               match.spec_name);
  if (mode == MutantMode::kPlain) {
    chunks = renderer.render(indent);
    if (chunks.empty() && window_is_whole_block(match) &&
        !block_is_module_body(tree, *match.block)) {
      chunks.push_back(cut.indent + "pass");
    }
  } else {
    std::vector<std::string> enabled = renderer.render(indent + 4);
    std::string pad(indent, ' ');
    std::string chunk = pad + "if _faultinj_runtime.fi_enabled(\"" + point +
                        "\"):";
    if (enabled.empty()) enabled.push_back(pad + "    pass");
    for (const std::string& line : enabled) chunk += "\n" + line;
    chunk += "\n" + pad + "else:";
    chunk += "\n" + render_statement_window(tree, *match.block, match.first,
                                            match.last, indent + 4);
    chunks.push_back(std::move(chunk));
  }

  MutantSource mutant;
  mutant.point_id = point;
  mutant.mode = mode;
  mutant.helper_module = emit_runtime_helper(trigger);
  std::string text = splice(tree, match, chunks);
  try {
    parse_source(text, tree.path());
  } catch (const ParseError& e) {
    throw std::runtime_error("spec '" + model.spec_name +
                             "': replacement renders unparseable in " +
                             tree.path() + ": " + e.what());
  }
  mutant.files[tree.path()] = std::move(text);
  return mutant;
}

MutantSource instrument_coverage(
    const std::vector<const ProgramTree*>& trees,
    const std::vector<MetaModel>& models, const InjectionPlan& plan,
    const TriggerChannel& trigger) {
  std::map<std::string, const ProgramTree*> by_path;
  for (const ProgramTree* tree : trees) by_path[tree->path()] = tree;
  std::map<std::string, const MetaModel*> by_spec;
  for (const MetaModel& m : models) by_spec[m.spec_name] = &m;

  std::map<std::string, std::vector<TextEdit>> edits;
  for (const InjectionPoint& point : plan.points) {
    auto tree_it = by_path.find(point.file);
    if (tree_it == by_path.end())
      throw std::runtime_error("plan is stale: no such file " + point.file);
    auto spec_it = by_spec.find(point.spec_name);
    if (spec_it == by_spec.end())
      throw std::runtime_error("no model for spec " + point.spec_name);
    const ProgramTree& tree = *tree_it->second;
    std::optional<Match> match =
        recover_match(tree, *spec_it->second, point);
    if (!match)
      throw std::runtime_error("plan is stale: point " + point.id +
                               " no longer matches " + point.file);

    std::string_view src = tree.source();
    const Node& first_stmt = *match->block->children[match->first];
    size_t s = first_stmt.start_offset();
    size_t ls = line_start_of(src, s);
    std::string probe = "_faultinj_runtime.fi_cov(\"" + point.id + "\")";
    if (blank_prefix(src, ls, s)) {
      std::string indent(src.substr(ls, s - ls));
      edits[point.file].push_back(TextEdit{ls, ls, indent + probe + "\n"});
    } else {
      edits[point.file].push_back(TextEdit{s, s, probe + "; "});
    }
  }

  MutantSource build;
  build.mode = MutantMode::kCoverage;
  build.helper_module = emit_runtime_helper(trigger);
  for (auto& [file, file_edits] : edits) {
    const ProgramTree& tree = *by_path.at(file);
    file_edits.push_back(import_edit(tree));
    std::string text = apply_edits(tree.source(), std::move(file_edits));
    try {
      parse_source(text, file);
    } catch (const ParseError& e) {
      throw std::runtime_error("coverage instrumentation broke " + file +
                               ": " + e.what());
    }
    build.files[file] = std::move(text);
  }
  return build;
}

void write_mutant(const MutantSource& mutant,
                  const std::filesystem::path& dir) {
  for (const auto& [rel, text] : mutant.files) write_file(dir / rel, text);
  write_file(dir / kHelperModuleName, mutant.helper_module);
}

}  // namespace faultinj
