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

namespace faultinj {

namespace {

// The call sites emitted by the mutator use the fi_* names: identifiers
// with two leading underscores are name-mangled inside class bodies, so
// __fi_corrupt(...) would not resolve from a method. The module still
// exports the __fi_* aliases.
const char* kHelperTemplate = R"PY("""Runtime support for fault-injected sources.

Written next to the project root of each sandbox copy. The trigger file
is re-read on every check so the executor can flip the fault between
workload rounds without restarting the target.
"""
import os
import random
import sys
import threading
import time

_DEFAULT_TRIGGER = %TRIGGER%

_announced = set()
_announce_lock = threading.Lock()


def fi_enabled(point_id=""):
    path = os.environ.get("FAULTINJ_TRIGGER_FILE", _DEFAULT_TRIGGER)
    enabled = False
    if path:
        try:
            with open(path, "r") as fh:
                enabled = fh.read().strip() == "1"
        except OSError:
            enabled = False
    if enabled and point_id:
        with _announce_lock:
            if point_id not in _announced:
                _announced.add(point_id)
                sys.stderr.write("FAULTINJ-ACT %s\n" % point_id)
                sys.stderr.flush()
    return enabled


def fi_cov(point_id):
    path = os.environ.get("FAULTINJ_COVERAGE_FILE", "")
    if path:
        with open(path, "a") as fh:
            fh.write("FAULTINJ-COV %s\n" % point_id)


def fi_corrupt(value, seed=None, mode="random"):
    if mode == "none":
        return None
    if seed is None:
        seed = int(os.environ.get("FAULTINJ_SEED", "0"))
    if isinstance(value, int) and not isinstance(value, bool):
        return -value - 1
    if isinstance(value, str) and mode == "random":
        rng = random.Random(seed)
        out = []
        for ch in value:
            if rng.random() < 0.5:
                out.append(chr(rng.randrange(33, 127)))
            else:
                out.append(ch)
        return "".join(out)
    return value


def _busy_loop():
    x = 0
    while True:
        x = (x + 1) % 1000003


def fi_hog(threads=1):
    for _ in range(max(1, int(threads))):
        t = threading.Thread(target=_busy_loop, daemon=True)
        t.start()


def fi_sleep(ms):
    time.sleep(ms / 1000.0)


__fi_corrupt = fi_corrupt
__fi_hog = fi_hog
__fi_sleep = fi_sleep
__fi_enabled = fi_enabled
)PY";

}  // namespace

std::string emit_runtime_helper(const TriggerChannel& trigger) {
  std::string quoted = "\"";
  for (char c : trigger.control_path) {
    if (c == '\\' || c == '"') quoted.push_back('\\');
    quoted.push_back(c);
  }
  quoted.push_back('"');

  std::string out = kHelperTemplate;
  size_t at = out.find("%TRIGGER%");
  out.replace(at, 9, quoted);
  return out;
}

}  // namespace faultinj
