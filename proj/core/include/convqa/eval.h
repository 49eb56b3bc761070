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

// Answer-quality metrics and per-question-type reports.

#ifndef CONVQA_EVAL_H_
#define CONVQA_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "convqa/dialog.h"

namespace convqa {

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
};

// Both sets empty gives (1, 1); an empty prediction otherwise gives 0
// precision; an empty gold set with a non-empty prediction gives recall 0.
PrecisionRecall EntityPrecisionRecall(const std::vector<std::string>& gold,
                                      const std::vector<std::string>& predicted);

struct SequenceCounts {
  uint64_t matched = 0;  // positions where gold and prediction agree
  uint64_t gold = 0;
  uint64_t predicted = 0;
};
SequenceCounts PositionalMatches(const std::vector<int64_t>& gold,
                                 const std::vector<int64_t>& predicted);

// Micro F1 over aligned positions of all pairs; 0 when nothing matched.
double PositionalF1(const std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>>& pairs);

struct BleuOptions {
  // 0 is raw clipping: any n-gram order without a match gives 0. Orders the
  // candidate is too short for are dropped from the geometric mean.
  double epsilon = 0;
  int max_order = 4;
};
inline constexpr double kBleuEpsilon = 1e-9;

std::vector<std::string> Tokenize(const std::string& text);

// Whitespace tokens. Empty candidate gives 0.
double Bleu(const std::string& reference, const std::string& candidate,
            const BleuOptions& options = {});
// Counts pooled over all pairs before the geometric mean.
double CorpusBleu(const std::vector<std::pair<std::string, std::string>>& pairs,
                  const BleuOptions& options = {});

enum class RecordKind { kEntities, kBoolean, kCount, kUtterance };
std::string_view RecordKindName(RecordKind kind);

struct EvalRecord {
  std::string type;  // question type label, see QuestionTypeLabel
  RecordKind kind = RecordKind::kEntities;
  std::vector<std::string> gold_entities, predicted_entities;
  std::vector<int64_t> gold_values, predicted_values;  // booleans as 0/1
  std::string gold_text, predicted_text;
};

// One JSON object per line:
//   {"type": ..., "kind": "entities"|"boolean"|"count"|"utterance",
//    "gold": ..., "predicted": ...}
// Entities are string arrays, booleans and counts arrays, utterances strings.
// Throws Error("parse") with the line number on malformed input.
std::vector<EvalRecord> ReadEvalRecords(const std::filesystem::path& path);
std::vector<EvalRecord> ParseEvalRecords(const std::string& jsonl);
std::string EvalRecordToJson(const EvalRecord& record);

// Row label of the results table for a user question; empty when the state
// is not scored. `answer` picks between the entity and count/boolean rows.
std::string QuestionTypeLabel(TurnState state, const AnswerSet& answer);
std::string ClarificationGenerationLabel();

// Gold records for every scored turn of the dialogs, answers re-executed
// against `store`, entities as external ids; predictions left empty. A
// question answered through a clarification is scored once, on the reply.
std::vector<EvalRecord> GoldRecords(const KgStore& store, const std::vector<Dialog>& dialogs,
                                    const ExecOptions& exec = {});

// Published reference numbers (percent) for a row label, for display only.
struct ReferenceValues {
  std::optional<double> recall, precision, f1, bleu;
};
std::optional<ReferenceValues> PublishedReference(const std::string& label);

struct ReportRow {
  std::string type;
  RecordKind kind = RecordKind::kEntities;
  uint64_t count = 0;
  // Entity rows.
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
  // Boolean and count rows.
  double f1 = 0, accuracy = 0;
  // Utterance rows: pooled BLEU-4 with epsilon smoothing, and mean sentence BLEU.
  double bleu = 0, mean_sentence_bleu = 0;
  std::optional<ReferenceValues> reference;
};

struct Report {
  // "Overall" (all entity records) first, then one row per label in label order.
  std::vector<ReportRow> rows;
};

inline constexpr char kOverallLabel[] = "Overall";

// Order-invariant: per-record values are sorted before summation.
Report Aggregate(const std::vector<EvalRecord>& records);

std::string ReportToJson(const Report& report, const std::string& config_json = "{}");
// Aligned text table with published reference values beside the measured ones.
std::string ReportToTable(const Report& report);

}  // namespace convqa

#endif  // CONVQA_EVAL_H_
