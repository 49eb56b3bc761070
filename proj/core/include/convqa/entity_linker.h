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

// Gazetteer-based mention detection and candidate tuple retrieval.

#ifndef CONVQA_ENTITY_LINKER_H_
#define CONVQA_ENTITY_LINKER_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convqa/dialog.h"
#include "convqa/kg_store.h"

namespace convqa {

inline constexpr size_t kDefaultMemoryCap = 10000;

// ASCII lowercase, ASCII punctuation to spaces, runs of whitespace collapsed
// to one space, no leading or trailing space. Other bytes pass through.
std::string NormalizeText(std::string_view text);

class Gazetteer {
 public:
  static Gazetteer Build(const KgStore& store);

  // Adds `alias` (normalized) as another name of `entity`.
  void AddAlias(EntityId entity, std::string_view alias);
  // Reads `entity_id<TAB>alias` lines; entity ids are the external ids of
  // labels.tsv. Throws Error("load") on unknown ids or malformed lines.
  void LoadAliases(const std::filesystem::path& path, const KgStore& store);

  // Entities named by an already normalized n-gram, or nullptr.
  const EntitySet* Find(std::string_view normalized) const;

  size_t size() const { return entries_.size(); }
  size_t max_ngram() const { return max_ngram_; }

 private:
  std::unordered_map<std::string, EntitySet> entries_;
  size_t max_ngram_ = 0;
};

struct Mention {
  // Token span [begin, end) over the normalized utterance.
  size_t begin = 0;
  size_t end = 0;
  std::string text;
  EntitySet entities;
};

// Greedy left-to-right longest match; spans never overlap.
std::vector<Mention> Link(const Gazetteer& gazetteer, std::string_view utterance);

// Entities of all mentions in first-mention order, without repeats.
std::vector<EntityId> MatchedEntities(const std::vector<Mention>& mentions);

struct CandidateSet {
  std::vector<EntityId> matched;
  std::vector<Tuple> tuples;
  bool truncated = false;
};

// Tuples with a matched entity as subject or object. Entities are visited
// round-robin, lowest fanout first (ties by id), each contributing its next
// unseen tuple, until `cap` tuples are taken. Throws Error("range") if cap is 0.
CandidateSet CandidateTuples(const KgStore& store, const std::vector<EntityId>& matched,
                             size_t cap = kDefaultMemoryCap);

struct LinkOptions {
  size_t cap = kDefaultMemoryCap;
  // Also match the entities of the previous user/system turn pair.
  bool use_context = true;
};

struct RecallRow {
  size_t questions = 0;
  // Questions whose plan has at least one supporting tuple.
  size_t scored = 0;
  double mean_tuple_recall = 0;
  double full_recall_fraction = 0;
  // Fraction of plan entities found among the matched entities.
  double mean_entity_recall = 0;
  size_t truncated = 0;
  double mean_candidates = 0;
};

struct RecallReport {
  RecallRow overall;
  std::map<std::string, RecallRow> by_state;
};

// For every question turn with a plan: link the utterance (plus context),
// retrieve candidates, and compare them with the plan's supporting tuples.
RecallReport LinkerRecall(const KgStore& store, const Gazetteer& gazetteer,
                          const std::vector<Dialog>& dialogs, const LinkOptions& options = {});

std::string RecallReportToJson(const RecallReport& report);

}  // namespace convqa

#endif  // CONVQA_ENTITY_LINKER_H_
