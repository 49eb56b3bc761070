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

// Dialog simulator: chains instantiated questions into dialogs in which every
// question after the first shares an entity or relation with the question
// right before it. Follow-up questions may refer back to the previous turn
// pair by coreference ("that river") or ellipsis ("And what about China ?");
// an ambiguous coreference triggers a clarification exchange, and large
// answers trigger a negotiation before a sample is shown.

#ifndef CONVQA_DIALOG_H_
#define CONVQA_DIALOG_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "convqa/kg_store.h"
#include "convqa/query_algebra.h"
#include "convqa/rng.h"
#include "convqa/templates.h"

namespace convqa {

enum class TurnState {
  kSimpleQ,
  kCoreferenceQ,
  kEllipsisQ,
  kLogicalQ,
  kQuantitativeCountQ,
  kQuantitativeArgOptQ,
  kQuantitativeThresholdQ,
  kComparativeQ,
  kComparativeCountQ,
  kBooleanQ,
  kClarificationQ,
  kClarificationA,
  kLargeAnswerNegotiation,
  kResponse,
};

std::string_view TurnStateName(TurnState state);
// Throws Error("parse") on an unknown name.
TurnState ParseTurnState(std::string_view name);

enum class Speaker { kUser, kSystem };

struct DialogTurn {
  Speaker speaker = Speaker::kUser;
  TurnState state = TurnState::kSimpleQ;
  std::string utterance;
  // Entities named verbatim in the utterance, in order.
  std::vector<EntityId> entities;
  std::optional<QueryPlan> plan;
  std::optional<AnswerSet> answer;
  // Type of a "that <type>" mention, on coreference turns.
  std::optional<TypeId> mention_type;
};

struct Dialog {
  std::string id;
  uint64_t seed = 0;
  std::vector<DialogTurn> turns;
};

// State carried from one question/answer pair to the next.
struct DialogContext {
  // Entities of the previous turn pair, most recent first: answer entities,
  // then the question's entities.
  std::vector<EntityId> salience;
  // Entities of the last system response.
  std::vector<EntityId> last_response;
  std::optional<QueryPlan> last_plan;
  std::optional<AnswerSet> last_answer;
  std::optional<RelationId> last_relation;
  // Candidates of an unresolved "that <type>" mention.
  std::vector<EntityId> pending_ambiguity;
};

struct DialogConfig {
  size_t display_limit = 10;
  size_t sample_size = 10;
  // Share of coreference turns that get an ambiguous mention.
  double ambiguity_rate = 0.15;
  // Weight per transform: direct, coreference, ellipsis, logical,
  // quantitative, comparative, boolean. Missing names weigh 1.
  std::map<std::string, double> transition_weights;
  // Question turns per dialog, including the first.
  size_t questions_per_dialog = 8;
  size_t answer_cap = 1000;
  // Render counts as English words ("thirty-one").
  bool number_words = false;
  ExecOptions exec;
};

// Names accepted in DialogConfig::transition_weights.
const std::vector<std::string>& TransformNames();

// Shared entity or relation between two question plans.
bool Linked(const QueryPlan& previous, const QueryPlan& next);

// Turn state for a question with this plan when asked directly.
TurnState QuestionState(const QueryPlan& plan);

struct Ambiguous {
  std::vector<EntityId> candidates;
};

// Resolves "that <type>": the unique entity of `type` in the previous turn
// pair, or the type-compatible entities of the last response when there are
// several. Throws Error("dialog") when nothing matches.
std::variant<EntityId, Ambiguous> ResolveCoreference(const KgStore& store,
                                                     const DialogContext& context,
                                                     TypeId type);

// System guess plus user reply. The guess is drawn from `candidates`; the
// reply confirms it or names `intended`. `plan` rides on the reply.
std::vector<DialogTurn> ClarificationExchange(const KgStore& store,
                                              const std::vector<EntityId>& candidates,
                                              EntityId intended, const QueryPlan& plan,
                                              Rng& rng);

// Answer text without negotiation: labels, a numeral or YES/NO.
std::string RenderAnswerText(const KgStore& store, const AnswerSet& answer,
                             bool number_words = false);

// One Response turn, or a negotiation (system count, user "No, show only a
// few of them", system sample) when an entity answer exceeds display_limit.
std::vector<DialogTurn> RenderResponse(const KgStore& store, const AnswerSet& answer,
                                       const DialogConfig& config, Rng& rng);

std::string NumberWords(uint64_t n);

// Context after a question with `plan` was answered with `answer`.
void AdvanceContext(DialogContext& context, const QueryPlan& plan,
                    const AnswerSet& answer);

// Predicate every generated question plan must satisfy; empty accepts all.
using PlanFilter = std::function<bool(const QueryPlan&)>;

class DialogGenerator {
 public:
  // Expands every simple template into its complex variants. Throws
  // Error("dialog") when `templates` holds no simple template.
  DialogGenerator(const KgStore& store, std::vector<QuestionTemplate> templates,
                  DialogConfig config = {});

  // First question pair: a direct question. Throws Error("dialog") when
  // nothing can be instantiated.
  std::vector<DialogTurn> Start(DialogContext& context, Rng& rng,
                                const PlanFilter& accept = {}) const;
  // Next linked question with its answer turns, or nullopt when no linked
  // question can be built (the dialog ends).
  std::optional<std::vector<DialogTurn>> Next(DialogContext& context, Rng& rng,
                                              const PlanFilter& accept = {}) const;

  Dialog Generate(std::string id, uint64_t seed, const PlanFilter& accept = {}) const;

  const std::vector<QuestionTemplate>& pool(TurnState state) const;
  const DialogConfig& config() const { return config_; }

 private:
  struct Candidate {
    const QuestionTemplate* source = nullptr;
    Instantiation inst;
  };

  std::optional<Candidate> LinkedQuestion(const DialogContext& context, TurnState state,
                                          Rng& rng, int tries,
                                          const PlanFilter& accept) const;
  std::optional<std::vector<DialogTurn>> Coreference(DialogContext& context, Rng& rng,
                                                     bool ambiguous,
                                                     const PlanFilter& accept) const;
  std::optional<std::vector<DialogTurn>> Ellipsis(DialogContext& context, Rng& rng,
                                                  const PlanFilter& accept) const;
  std::optional<std::vector<DialogTurn>> Emit(DialogContext& context, TurnState state,
                                              const Instantiation& inst, Rng& rng) const;
  std::vector<DialogTurn> Answer(DialogContext& context, const QueryPlan& plan,
                                 const AnswerSet& answer, Rng& rng) const;

  const KgStore& store_;
  DialogConfig config_;
  std::vector<QuestionTemplate> simple_;
  std::map<TurnState, std::vector<QuestionTemplate>> pools_;
};

// One JSON object per dialog: {dialog_id, seed, turns: [{speaker, state,
// utterance, entities, plan?, answer?, mention_type?}]}. Plans are canonical
// plan text; entity ids are dense store ids.
std::string DialogToJson(const KgStore& store, const Dialog& dialog);
Dialog DialogFromJson(const KgStore& store, std::string_view line);

std::string AnswerToJson(const AnswerSet& answer);
AnswerSet AnswerFromJson(std::string_view text);

}  // namespace convqa

#endif  // CONVQA_DIALOG_H_
