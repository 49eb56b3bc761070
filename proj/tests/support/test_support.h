// Copyright 2026 The convqa Authors.
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

#ifndef CONVQA_TESTS_SUPPORT_TEST_SUPPORT_H_
#define CONVQA_TESTS_SUPPORT_TEST_SUPPORT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "convqa/kg_store.h"
#include "convqa/query_algebra.h"
#include "convqa/rng.h"

namespace convqa::testing {

std::filesystem::path FixtureDir();
std::filesystem::path KgTDir();
const KgStore& KgT();

// Fresh empty directory under the system temp dir.
std::filesystem::path ScratchDir(const std::string& name);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& text);

// Retrieve answer entities; fails the calling test on any other kind.
EntitySet Entities(const AnswerSet& answer);
uint64_t SingleCount(const AnswerSet& answer);
EntitySet Labels(const KgStore& store, std::initializer_list<const char*> labels);

struct PlanSpace {
  uint64_t max_threshold = 4;
  // Limits below apply to the compound parts of the space; SIZE_MAX means
  // exhaustive. Sampling draws from `seed`.
  size_t max_binary = SIZE_MAX;
  size_t max_groups = SIZE_MAX;
  size_t max_references = SIZE_MAX;
  size_t max_verify = SIZE_MAX;
  uint64_t seed = 0;
};

// Retrieve/Count over every lookup, every same-type binary combination and
// complement, every TypeUnion pair; Verify over single facts and fact pairs;
// ArgOpt/threshold/comparative plans over every group spec with one or two
// counted entries.
std::vector<QueryPlan> EnumeratePlans(const KgStore& store, const PlanSpace& space);

SetExpr RandomSetExpr(const KgStore& store, Rng& rng, int depth);
QueryPlan RandomPlan(const KgStore& store, Rng& rng);

}  // namespace convqa::testing

#endif  // CONVQA_TESTS_SUPPORT_TEST_SUPPORT_H_
