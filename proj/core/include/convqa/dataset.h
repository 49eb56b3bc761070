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

// Corpus generation, the tuple-disjoint train/valid/test split, corpus
// statistics and JSON-lines I/O.

#ifndef CONVQA_DATASET_H_
#define CONVQA_DATASET_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convqa/dialog.h"
#include "convqa/kg_store.h"

namespace convqa {

struct Corpus {
  std::vector<Dialog> dialogs;
  // Tuples supporting any plan of dialog i, sorted and unique.
  std::vector<std::vector<Tuple>> provenance;
  // Dialogs that could not be started (store exhausted); reported, not fatal.
  size_t failed = 0;
};

// Tuples used by the plans of `dialog`.
std::vector<Tuple> DialogProvenance(const KgStore& store, const Dialog& dialog);

struct SplitSpec {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
  uint64_t seed = 0;
};

enum class SplitPart { kTrain = 0, kValid = 1, kTest = 2 };

// Part owning a tuple under `spec` (seeded hash of the tuple).
SplitPart TuplePart(const Tuple& tuple, const SplitSpec& spec);

// Part a dialog without provenance is placed in (seeded hash of its id).
SplitPart DialogIdPart(const std::string& dialog_id, const SplitSpec& spec);

// Dialog i uses seed DeriveSeed(seed, i) and id "dialog-<i>". The result
// does not depend on `threads`.
//
// With `split_aware`, dialog i is confined to the part DialogIdPart() gives
// its id: questions whose supporting tuples fall outside that part are
// rejected during generation. Answers are still computed over the whole
// store, and SplitCorpus() still checks every dialog.
Corpus GenerateCorpus(const KgStore& store, const DialogGenerator& generator,
                      size_t num_dialogs, uint64_t seed, size_t threads = 1,
                      const std::optional<SplitSpec>& split_aware = std::nullopt);

struct CorpusSplit {
  // Dialog indices into the corpus.
  std::vector<size_t> train, valid, test, discarded;
};

// Each dialog goes to the part owning all of its provenance tuples; dialogs
// whose tuples span parts are discarded. A dialog without provenance is
// placed by a hash of its id. Throws Error("range") on invalid fractions.
CorpusSplit SplitCorpus(const Corpus& corpus, const SplitSpec& spec);

struct CorpusStats {
  size_t dialogs = 0;
  size_t utterances = 0;
  // User question turns plus system Response turns.
  size_t qa_utterances = 0;
  double avg_utterances = 0;
  // Over user turns in a question state (SimpleQ ... BooleanQ).
  double avg_question_words = 0;
  // Over system Response turns.
  double avg_response_words = 0;
  double avg_states = 0;
  // Distinct lowercased whitespace tokens with frequency >= vocab_threshold.
  size_t vocab_size = 0;
  size_t vocab_threshold = 10;
  std::map<std::string, size_t> state_counts;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

bool IsQuestionState(TurnState state);

CorpusStats ComputeStats(const std::vector<const Dialog*>& dialogs,
                         size_t vocab_threshold = 10);
CorpusStats ComputeStats(const std::vector<Dialog>& dialogs, size_t vocab_threshold = 10);

std::string StatsToJson(const CorpusStats& stats);

// Full-scale figures of the original training split, printed for context.
std::string ReferenceStatsJson();

// One dialog per line.
void WriteDialogs(const std::filesystem::path& path, const KgStore& store,
                  const std::vector<const Dialog*>& dialogs);
std::vector<Dialog> ReadDialogs(const std::filesystem::path& path, const KgStore& store);

struct SplitReport {
  size_t train = 0, valid = 0, test = 0, discarded = 0;
};

// Writes train.jsonl, valid.jsonl, test.jsonl, discarded.jsonl and
// stats.json into `dir`. `extra_json` (an object, may be empty) is merged
// into stats.json.
SplitReport WriteSplit(const std::filesystem::path& dir, const KgStore& store,
                       const Corpus& corpus, const CorpusSplit& split,
                       size_t vocab_threshold = 10, const std::string& extra_json = "");

}  // namespace convqa

#endif  // CONVQA_DATASET_H_
