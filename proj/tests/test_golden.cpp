// Copyright 2026 The spanet-desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "doctest.h"
#include "golden_trace.hpp"

TEST_SUITE("golden") {
  TEST_CASE("K=2 subregion pass and one training step replay the recorded trace") {
    const golden::Outcome o = golden::Replay(SPANET_GOLDEN_DIR "/trace_k2.json");
    INFO("last worst quantity: " << (o.notes.empty() ? "" : o.notes.back()));
    CHECK(o.structural == 0);
    CHECK(o.max_abs <= 1e-9);
    CHECK(o.max_rel <= 1e-9);
  }
}
