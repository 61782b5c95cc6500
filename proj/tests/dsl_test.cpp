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

#include <gtest/gtest.h>

#include "support/test_util.hpp"

namespace faultinj {
namespace {

const char* kMfcText =
    "change { $BLOCK{tag=b1} $CALL{name=delete_*}(...) $BLOCK{tag=b2} } "
    "into { $BLOCK{tag=b1} $BLOCK{tag=b2} }";

TEST(DslParse, MfcSpecShape) {
  BugSpec spec = parse_spec(kMfcText, "mfc");
  ASSERT_EQ(spec.pattern.size(), 3u);
  EXPECT_EQ(spec.pattern[0].kind, PatternElement::Kind::kDirective);
  EXPECT_EQ(spec.pattern[0].directive->kind, DirectiveKind::kBlock);
  EXPECT_EQ(spec.pattern[0].directive->tag, "b1");
  EXPECT_EQ(spec.pattern[1].directive->kind, DirectiveKind::kCall);
  EXPECT_EQ(spec.pattern[1].directive->attr("name"), "delete_*");
  EXPECT_EQ(spec.pattern[1].directive->arg_mode,
            DirectiveSpec::ArgMode::kAnyArity);
  EXPECT_EQ(spec.pattern[2].directive->tag, "b2");
  ASSERT_EQ(spec.replacement.size(), 2u);
  EXPECT_EQ(spec.replacement[0].directive->tag, "b1");
  EXPECT_EQ(spec.replacement[1].directive->tag, "b2");
}

TEST(DslParse, IdentityShapedCallSpecIsValid) {
  BugSpec spec = parse_spec("change { $CALL(...) } into { $CALL(...) }", "id");
  EXPECT_TRUE(validate_spec(spec).empty());
  ASSERT_EQ(spec.pattern.size(), 1u);
  EXPECT_TRUE(spec.pattern[0].directive->tag.empty());
}

TEST(DslParse, EmptyPatternIsAnError) {
  EXPECT_THROW(parse_spec("change { } into { pass }", "e"), ParseError);
}

TEST(DslParse, UnknownDirective) {
  try {
    parse_spec("change { $FROB(...) } into { }", "e");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown directive"),
              std::string::npos);
  }
}

TEST(DslParse, UnknownAttributeRejected) {
  EXPECT_THROW(parse_spec("change { $CALL{nome=x}(...) } into { }", "e"),
               ParseError);
}

TEST(DslParse, MalformedIntegerAttribute) {
  BugSpec spec =
      parse_spec("change { $BLOCK{tag=b, max=abc} } into { }", "e");
  EXPECT_THROW(compile_spec(spec), ParseError);
}

TEST(DslParse, TagShorthandAndAttrAreEquivalent) {
  BugSpec a = parse_spec("change { $EXPR#e = $CALL(...) } into { }", "a");
  BugSpec b = parse_spec("change { $EXPR{tag=e} = $CALL(...) } into { }", "b");
  ASSERT_EQ(a.pattern.size(), 1u);
  ASSERT_EQ(b.pattern.size(), 1u);
  ASSERT_TRUE(a.pattern[0].pieces[0].is_hole);
  EXPECT_EQ(a.pattern[0].pieces[0].hole->tag, "e");
  EXPECT_EQ(b.pattern[0].pieces[0].hole->tag, "e");
}

TEST(DslParse, SyntaxErrorHasPosition) {
  try {
    parse_spec("change { $CALL(...) } off { }", "e");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GE(e.pos().line, 1);
    EXPECT_NE(std::string(e.what()).find("into"), std::string::npos);
  }
}

TEST(DslParse, CompoundFragmentWithBraceSuite) {
  BugSpec spec = parse_spec(
      "change { if $EXPR#cond : { $BLOCK{tag=body, max=4} continue } } "
      "into { }",
      "mifs");
  ASSERT_EQ(spec.pattern.size(), 1u);
  const PatternElement& el = spec.pattern[0];
  EXPECT_TRUE(el.compound);
  ASSERT_EQ(el.clauses.size(), 1u);
  EXPECT_EQ(el.clauses[0].keyword, "if");
  ASSERT_EQ(el.clauses[0].body.size(), 2u);
  EXPECT_EQ(el.clauses[0].body[0].directive->kind, DirectiveKind::kBlock);
  EXPECT_TRUE(spec.replacement.empty());
}

TEST(DslValidate, UnboundReplacementTag) {
  BugSpec spec = parse_spec(
      "change { $BLOCK{tag=b1} $CALL(...) } into { $BLOCK{tag=b3} }", "e");
  auto diags = validate_spec(spec);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].rule, "unbound-tag");
  EXPECT_NE(diags[0].message.find("b3"), std::string::npos);
}

TEST(DslValidate, MfcSpecIsClean) {
  EXPECT_TRUE(validate_spec(parse_spec(kMfcText, "mfc")).empty());
}

TEST(DslValidate, DuplicateTag) {
  BugSpec spec = parse_spec(
      "change { $BLOCK{tag=b1} $CALL(...) $BLOCK{tag=b1} } into { }", "e");
  auto diags = validate_spec(spec);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_EQ(diags[0].rule, "duplicate-tag");
}

TEST(DslValidate, ReplacementDirectivesOnPatternSideRejected) {
  BugSpec spec =
      parse_spec("change { $HOG{threads=2} } into { pass }", "e");
  auto diags = validate_spec(spec);
  ASSERT_FALSE(diags.empty());
  EXPECT_EQ(diags[0].rule, "wrong-side");
}

TEST(DslCompile, MfcPatternTree) {
  MetaModel model = compile_spec(parse_spec(kMfcText, "mfc"));
  ASSERT_EQ(model.pattern_tree.size(), 3u);
  const DirectiveSpec& b1 = *model.pattern_tree[0].directive;
  EXPECT_EQ(b1.min, 1);
  EXPECT_EQ(b1.max, INT_MAX);
  const DirectiveSpec& call = *model.pattern_tree[1].directive;
  EXPECT_EQ(call.name_glob, "delete_*");
  EXPECT_EQ(call.arg_mode, DirectiveSpec::ArgMode::kAnyArity);
  EXPECT_EQ(model.tag_table.size(), 2u);
  EXPECT_TRUE(model.tag_table.count("b1"));
  EXPECT_TRUE(model.tag_table.count("b2"));
}

TEST(DslCompile, MifsBlockMax) {
  MetaModel model = compile_spec(parse_spec(
      "change { if $EXPR#cond : { $BLOCK{tag=body, max=4} continue } } "
      "into { }",
      "mifs"));
  const PatternElement& el = model.pattern_tree[0];
  const DirectiveSpec& block = *el.clauses[0].body[0].directive;
  EXPECT_EQ(block.max, 4);
  EXPECT_EQ(block.min, 1);
}

TEST(DslCompile, UnparseableFragmentFails) {
  BugSpec spec = parse_spec("change { if x == } into { }", "e");
  try {
    compile_spec(spec);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("not valid Python"),
              std::string::npos);
  }
}

TEST(DslCompile, TagClosureHoldsOverGeneratedSpecs) {
  // Tag closure: compilation succeeds iff replacement tags are a subset
  // of pattern tags, over a generated family of specs.
  const char* tags[] = {"x", "y", "z"};
  for (int pat_mask = 1; pat_mask < 8; ++pat_mask) {
    for (int rep_mask = 0; rep_mask < 8; ++rep_mask) {
      std::string pattern, replacement;
      for (int i = 0; i < 3; ++i)
        if (pat_mask & (1 << i))
          pattern += std::string("$BLOCK{tag=") + tags[i] + "} ";
      for (int i = 0; i < 3; ++i)
        if (rep_mask & (1 << i))
          replacement += std::string("$BLOCK{tag=") + tags[i] + "} ";
      std::string text =
          "change { " + pattern + "} into { " + replacement + "}";
      BugSpec spec = parse_spec(text, "gen");
      bool subset = (rep_mask & ~pat_mask) == 0;
      if (subset) {
        EXPECT_NO_THROW(compile_spec(spec)) << text;
      } else {
        EXPECT_THROW(compile_spec(spec), ParseError) << text;
      }
    }
  }
}

TEST(DslCompile, WpfArgumentPattern) {
  MetaModel model = compile_spec(parse_spec(
      "change { $CALL{name=*.execute}#c($STRING{contains=-}#s) } "
      "into { $CALL#c($CORRUPT(#s)) }",
      "wpf"));
  const DirectiveSpec& call = *model.pattern_tree[0].directive;
  EXPECT_EQ(call.arg_mode, DirectiveSpec::ArgMode::kList);
  ASSERT_EQ(call.args.size(), 1u);
  const DirectiveSpec& str = *call.args[0].directive;
  EXPECT_EQ(str.kind, DirectiveKind::kString);
  EXPECT_EQ(str.contains, "-");
  EXPECT_EQ(model.tag_table.at("s"), DirectiveKind::kString);
  // Replacement: call override wrapping the bound string.
  const DirectiveSpec& rep = *model.replacement_template[0].directive;
  ASSERT_EQ(rep.args.size(), 1u);
  EXPECT_EQ(rep.args[0].directive->kind, DirectiveKind::kCorrupt);
}

TEST(DslRoundTrip, RenderParseRenderIsStable) {
  std::vector<std::string> texts = {
      kMfcText,
      "change { if $EXPR#cond : { $BLOCK{tag=body, max=4} continue } } "
      "into { }",
      "change { $CALL{name=*.execute}#c($STRING{contains=-}#s) } into { "
      "$CALL#c($CORRUPT(#s)) }",
      "change { $EXPR#t = $CALL{name=get_*}#c(...) } into { $EXPR#t = None }",
      "change { $CALL{name=os.*}#c(...) } into { raise OSError(\"boom\") }",
      "change { $CALL#c(...) } into { $TIMEOUT{ms=100} $CALL#c }",
  };
  for (const std::string& text : texts) {
    std::string once = render_spec(parse_spec(text, "t"));
    std::string twice = render_spec(parse_spec(once, "t"));
    EXPECT_EQ(once, twice) << text;
  }
}

TEST(DslDeterminism, IdenticalTextIdenticalMetaModel) {
  for (const char* text :
       {kMfcText,
        "change { $CALL{name=*.execute}#c($STRING{contains=-}#s) } into { "
        "$CALL#c($CORRUPT{mode=negate, seed=3}(#s)) }"}) {
    std::string a = serialize_meta_model(compile_spec(parse_spec(text, "s")));
    std::string b = serialize_meta_model(compile_spec(parse_spec(text, "s")));
    EXPECT_EQ(a, b);
  }
}

TEST(FaultModelIo, RoundTrip) {
  testing::TempDir dir("model");
  FaultModelFile model;
  model.specs.push_back(parse_spec(kMfcText, "mfc"));
  model.specs.push_back(parse_spec(
      "change { if $EXPR#c : { $BLOCK#b continue } } into { }", "mifs"));
  model.specs.push_back(parse_spec(
      "change { $CALL{name=*.execute}#c($STRING{contains=-}#s) } into { "
      "$CALL#c($CORRUPT(#s)) }",
      "wpf"));
  auto path = dir.path() / "model.json";
  save_fault_model(model, path);
  FaultModelFile loaded = load_fault_model(path);
  ASSERT_EQ(loaded.specs.size(), 3u);
  EXPECT_EQ(loaded.specs[0].name, "mfc");
  EXPECT_EQ(*loaded.specs[0].source_text, *model.specs[0].source_text);
  // Structural identity via canonical rendering.
  for (size_t i = 0; i < 3; ++i)
    EXPECT_EQ(render_spec(loaded.specs[i]), render_spec(model.specs[i]));
}

TEST(FaultModelIo, EmptyModel) {
  testing::TempDir dir("model");
  FaultModelFile model;
  auto path = dir.path() / "model.json";
  save_fault_model(model, path);
  EXPECT_EQ(load_fault_model(path).specs.size(), 0u);
}

TEST(FaultModelIo, DuplicateNamesRejected) {
  testing::TempDir dir("model");
  auto path = dir.path() / "model.json";
  write_file(path,
             "{\"format_version\":1,\"specs\":["
             "{\"name\":\"a\",\"text\":\"change { $CALL(...) } into { }\"},"
             "{\"name\":\"a\",\"text\":\"change { $CALL(...) } into { }\"}]}");
  try {
    load_fault_model(path);
    FAIL() << "expected duplicate-name error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate spec name 'a'"),
              std::string::npos);
    EXPECT_NE(std::string(e.what()).find("/specs/1/name"), std::string::npos);
  }
}

TEST(FaultModelIo, SchemaViolationNamesJsonPath) {
  testing::TempDir dir("model");
  auto path = dir.path() / "model.json";
  write_file(path, "{\"format_version\":1,\"specs\":[{\"name\":3}]}");
  try {
    load_fault_model(path);
    FAIL() << "expected schema error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/specs/0/name"), std::string::npos);
  }
}

TEST(ShippedModels, AllParseValidateAndCompile) {
  namespace fs = std::filesystem;
  int count = 0;
  for (const auto& entry :
       fs::directory_iterator(testing::faultmodels_dir())) {
    if (entry.path().extension() != ".fispec") continue;
    BugSpec spec =
        parse_spec(read_file(entry.path()), entry.path().stem().string());
    EXPECT_TRUE(validate_spec(spec).empty()) << entry.path();
    EXPECT_NO_THROW(compile_spec(spec)) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 7);
}

}  // namespace
}  // namespace faultinj
