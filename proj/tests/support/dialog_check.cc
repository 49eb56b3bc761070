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

#include "dialog_check.h"

#include <algorithm>
#include <set>

namespace convqa::testing {
namespace {

bool IsQuestionState(TurnState s) {
  switch (s) {
    case TurnState::kClarificationQ:
    case TurnState::kLargeAnswerNegotiation:
    case TurnState::kResponse:
      return false;
    default:
      return true;
  }
}

// Shares an entity or relation, recomputed from the plans' lookups.
bool SharesMention(const QueryPlan& a, const QueryPlan& b) {
  const PlanMentions x = MentionsOf(a);
  const PlanMentions y = MentionsOf(b);
  std::set<uint32_t> ex, rx;
  for (EntityId e : x.entities) ex.insert(e.value());
  for (RelationId r : x.relations) rx.insert(r.value());
  for (EntityId e : y.entities) {
    if (ex.count(e.value())) return true;
  }
  for (RelationId r : y.relations) {
    if (rx.count(r.value())) return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> DialogViolations(const KgStore& store, const Dialog& dialog,
                                          DialogCheckCounts* counts) {
  DialogCheckCounts local;
  DialogCheckCounts& c = counts ? *counts : local;
  std::vector<std::string> out;
  auto fail = [&](size_t i, const std::string& what) {
    out.push_back(dialog.id + " turn " + std::to_string(i) + ": " + what);
  };
  const auto& turns = dialog.turns;

  DialogContext context;
  std::optional<QueryPlan> previous_question;
  std::optional<QueryPlan> pending_plan;
  for (size_t i = 0; i < turns.size(); ++i) {
    const DialogTurn& t = turns[i];
    if (t.speaker == Speaker::kUser && t.plan) {
      // A question (or the clarification reply carrying it).
      ++c.questions;
      if (previous_question) {
        if (SharesMention(*previous_question, *t.plan)) {
          ++c.linked;
        } else {
          fail(i, "question not linked to the previous question");
        }
      } else {
        ++c.linked;
      }
      pending_plan = t.plan;
      if (t.state == TurnState::kCoreferenceQ) {
        if (!t.mention_type) {
          fail(i, "coreference turn without mention type");
        } else {
          const auto r = ResolveCoreference(store, context, *t.mention_type);
          const EntityId* e = std::get_if<EntityId>(&r);
          const auto m = MentionsOf(*t.plan).entities;
          if (!e || std::find(m.begin(), m.end(), *e) == m.end()) {
            fail(i, "coreference does not resolve to a plan entity");
          }
        }
      }
    }
    if (t.state == TurnState::kClarificationQ) {
      ++c.clarifications;
      bool ok = i > 0 && turns[i - 1].speaker == Speaker::kUser &&
                turns[i - 1].state == TurnState::kCoreferenceQ && !turns[i - 1].plan &&
                turns[i - 1].mention_type;
      if (ok) {
        const auto r = ResolveCoreference(store, context, *turns[i - 1].mention_type);
        const auto* amb = std::get_if<Ambiguous>(&r);
        ok = amb && amb->candidates.size() >= 2 && !t.entities.empty() &&
             std::find(amb->candidates.begin(), amb->candidates.end(), t.entities[0]) !=
                 amb->candidates.end();
        if (ok && i + 1 < turns.size()) {
          const DialogTurn& reply = turns[i + 1];
          ok = reply.state == TurnState::kClarificationA && reply.plan &&
               (i + 2 >= turns.size() || turns[i + 2].state != TurnState::kClarificationA);
          if (ok) {
            // The resolved referent must be one of the candidates.
            const auto m = MentionsOf(*reply.plan).entities;
            ok = std::any_of(amb->candidates.begin(), amb->candidates.end(), [&](EntityId e) {
              return std::find(m.begin(), m.end(), e) != m.end();
            });
          }
        } else {
          ok = false;
        }
      }
      if (ok) {
        ++c.clarifications_ok;
      } else {
        fail(i, "clarification without a preceding ambiguity");
      }
    }
    if (t.speaker == Speaker::kSystem && t.answer) {
      ++c.answers;
      if (!pending_plan) {
        fail(i, "answer without a question");
      } else if (Execute(store, *pending_plan) == *t.answer &&
                 BruteForceExecute(store, *pending_plan) == *t.answer) {
        ++c.answers_replayed;
      } else {
        fail(i, "recorded answer differs from replay");
      }
      if (t.state == TurnState::kResponse) {
        AdvanceContext(context, *pending_plan, *t.answer);
        previous_question = pending_plan;
        pending_plan.reset();
      }
    }
    if (t.speaker == Speaker::kUser && !t.plan && IsQuestionState(t.state) &&
        !(t.state == TurnState::kCoreferenceQ && i + 1 < turns.size() &&
          turns[i + 1].state == TurnState::kClarificationQ)) {
      fail(i, "question without a plan");
    }
  }
  return out;
}

}  // namespace convqa::testing
