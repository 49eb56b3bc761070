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

// Seeded random knowledge graphs for property tests, benchmarks and toy
// corpora. Every relation has a fixed domain and range type so generated
// questions stay well typed.

#ifndef CONVQA_SYNTHETIC_H_
#define CONVQA_SYNTHETIC_H_

#include <cstddef>
#include <cstdint>

#include "convqa/kg_store.h"

namespace convqa {

struct SyntheticKgOptions {
  size_t num_entities = 100;
  size_t num_relations = 4;
  size_t num_types = 3;
  size_t num_tuples = 400;
  // Probability that an entity also belongs to a second type.
  double extra_type_rate = 0.1;
  // Probability that an entity reuses the label of an earlier entity.
  double shared_label_rate = 0.0;
  // Subjects and objects are drawn with a skew toward low-index members when
  // set, which produces a few high-fanout entities.
  bool skewed = true;
};

// Up to num_tuples distinct tuples; fewer if the typed domains are too small.
KgStore RandomKg(const SyntheticKgOptions& options, uint64_t seed);

// Pronounceable capitalized pseudo-word, deterministic in `index`.
std::string PseudoWord(uint64_t index);

}  // namespace convqa

#endif  // CONVQA_SYNTHETIC_H_
