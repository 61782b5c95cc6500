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

#ifndef FAULTINJ_MUTATOR_HPP_
#define FAULTINJ_MUTATOR_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "faultinj/scanner.hpp"

namespace faultinj {

// File name of the emitted runtime helper, written at the project root of
// every sandbox copy.
inline constexpr const char* kHelperModuleName = "_faultinj_runtime.py";
inline constexpr const char* kHelperImportLine = "import _faultinj_runtime\n";

inline constexpr const char* kTriggerEnvVar = "FAULTINJ_TRIGGER_FILE";
inline constexpr const char* kCoverageEnvVar = "FAULTINJ_COVERAGE_FILE";
inline constexpr const char* kSeedEnvVar = "FAULTINJ_SEED";

// Markers scraped from outputs: `FAULTINJ-ACT <id>` when a triggered
// branch executes, `FAULTINJ-COV <id>` from coverage builds.
inline constexpr const char* kActivationMarker = "FAULTINJ-ACT";
inline constexpr const char* kCoverageMarker = "FAULTINJ-COV";

enum class MutantMode { kPlain, kTriggered, kCoverage };

// Flag file flipped by the executor between rounds; the helper re-reads
// it on every evaluation, so no target restart is needed.
struct TriggerChannel {
  std::string control_path;
  std::string env_var_name = kTriggerEnvVar;
};

struct MutantSource {
  std::string point_id;  // empty for coverage builds
  MutantMode mode = MutantMode::kPlain;
  std::map<std::string, std::string> files;  // touched files only
  std::string helper_module;
};

// Expands the replacement template for one match. Returns rendered
// statements at indent 0: tag references splice the bound source,
// $CORRUPT wraps its argument in a seeded helper call, $HOG and $TIMEOUT
// expand to helper calls, an empty template yields an empty list.
std::vector<std::string> apply_replacement(const ProgramTree& tree,
                                           const Match& match,
                                           const MetaModel& model,
                                           uint64_t rng_seed);

// One mutant for one match. PLAIN substitutes the replacement in place;
// TRIGGERED wraps it in `if <enabled>: ... else: <original>`; the
// original window is preserved verbatim in the disabled branch. The
// mutated file is re-parsed before returning; a render that does not
// parse is reported with the spec name.
MutantSource generate_mutant(const ProgramTree& tree, const Match& match,
                             const MetaModel& model, MutantMode mode,
                             const TriggerChannel& trigger, uint64_t rng_seed);

// Runtime helper source. Defines the enabled-check, fi_corrupt / fi_hog /
// fi_sleep / fi_cov and their spec-era double-underscore aliases.
std::string emit_runtime_helper(const TriggerChannel& trigger);

// Coverage build: a `fi_cov("<id>")` probe immediately before each
// point's first statement, semantics otherwise unchanged. Points sharing
// a statement emit probes in plan order. Throws when a point cannot be
// re-derived (stale plan).
MutantSource instrument_coverage(
    const std::vector<const ProgramTree*>& trees,
    const std::vector<MetaModel>& models, const InjectionPlan& plan,
    const TriggerChannel& trigger);

// Writes a mutant to a directory: all touched files plus the helper.
void write_mutant(const MutantSource& mutant,
                  const std::filesystem::path& dir);

// Verbatim rendering of statements [first, last) of a block, re-indented
// to the given column. Line starts inside string literals are never
// touched. Returns one possibly multi-line chunk without a trailing
// newline.
std::string render_statement_window(const ProgramTree& tree,
                                    const Node& block, int first, int last,
                                    int target_indent);

}  // namespace faultinj

#endif  // FAULTINJ_MUTATOR_HPP_
