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

#include "convqa/dialog.h"

#include <algorithm>
#include <array>
#include <set>

#include "convqa/plan_text.h"
#include "json.hpp"

namespace convqa {
namespace {

using Json = nlohmann::json;

constexpr std::array<std::pair<TurnState, std::string_view>, 14> kStateNames = {{
    {TurnState::kSimpleQ, "SimpleQ"},
    {TurnState::kCoreferenceQ, "CoreferenceQ"},
    {TurnState::kEllipsisQ, "EllipsisQ"},
    {TurnState::kLogicalQ, "LogicalQ"},
    {TurnState::kQuantitativeCountQ, "QuantitativeCountQ"},
    {TurnState::kQuantitativeArgOptQ, "QuantitativeArgOptQ"},
    {TurnState::kQuantitativeThresholdQ, "QuantitativeThresholdQ"},
    {TurnState::kComparativeQ, "ComparativeQ"},
    {TurnState::kComparativeCountQ, "ComparativeCountQ"},
    {TurnState::kBooleanQ, "BooleanQ"},
    {TurnState::kClarificationQ, "ClarificationQ"},
    {TurnState::kClarificationA, "ClarificationA"},
    {TurnState::kLargeAnswerNegotiation, "LargeAnswerNegotiation"},
    {TurnState::kResponse, "Response"},
}};

// Turn state of a question built from `schema` (a template plan schema).
std::optional<TurnState> SchemaState(const SyntaxNode& schema) {
  if (!schema.is_call) return std::nullopt;
  const std::string& h = schema.text;
  if (h == "Retrieve") {
    const bool lookup = !schema.args.empty() && schema.args[0].is_call &&
                        schema.args[0].text == "Lookup";
    return lookup ? TurnState::kSimpleQ : TurnState::kLogicalQ;
  }
  if (h == "Count") return TurnState::kQuantitativeCountQ;
  if (h == "ArgOpt") return TurnState::kQuantitativeArgOptQ;
  if (h == "ThresholdFilter" || h == "CountOverThreshold") {
    return TurnState::kQuantitativeThresholdQ;
  }
  if (h == "Comparative") return TurnState::kComparativeQ;
  if (h == "CountOverComparative") return TurnState::kComparativeCountQ;
  if (h == "Verify") return TurnState::kBooleanQ;
  return std::nullopt;
}

std::vector<EntityId> AnswerEntities(const AnswerSet& answer) {
  if (const auto* e = std::get_if<EntityAnswer>(&answer)) return e->entities.ids();
  return {};
}

std::vector<EntityId> BoundEntities(const Bindings& b, int skip = 0) {
  std::vector<EntityId> out;
  for (const auto& [k, e] : b.entity) {
    if (k != skip) out.push_back(e);
  }
  return out;
}

bool Contains(const std::vector<EntityId>& v, EntityId e) {
  return std::find(v.begin(), v.end(), e) != v.end();
}

const char* kStateGroups[] = {"direct", "coreference", "ellipsis", "logical",
                              "quantitative", "comparative", "boolean"};

std::vector<TurnState> StatesOf(std::string_view transform) {
  if (transform == "direct") return {TurnState::kSimpleQ};
  if (transform == "logical") return {TurnState::kLogicalQ};
  if (transform == "quantitative") {
    return {TurnState::kQuantitativeCountQ, TurnState::kQuantitativeArgOptQ,
            TurnState::kQuantitativeThresholdQ};
  }
  if (transform == "comparative") return {TurnState::kComparativeQ, TurnState::kComparativeCountQ};
  if (transform == "boolean") return {TurnState::kBooleanQ};
  return {};
}

std::string JoinLabels(const KgStore& store, const std::vector<EntityId>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += store.label(ids[i]);
  }
  return out;
}

std::string Respectively(const std::vector<std::string>& parts) {
  if (parts.size() == 1) return parts[0];
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += i + 1 == parts.size() ? " and " : ", ";
    out += parts[i];
  }
  return out + " respectively";
}

}  // namespace

std::string_view TurnStateName(TurnState state) {
  for (const auto& [s, name] : kStateNames) {
    if (s == state) return name;
  }
  return "";
}

TurnState ParseTurnState(std::string_view name) {
  for (const auto& [s, n] : kStateNames) {
    if (n == name) return s;
  }
  throw Error("parse", "unknown turn state '" + std::string(name) + "'");
}

const std::vector<std::string>& TransformNames() {
  static const std::vector<std::string> names(std::begin(kStateGroups), std::end(kStateGroups));
  return names;
}

bool Linked(const QueryPlan& previous, const QueryPlan& next) {
  const PlanMentions a = MentionsOf(previous);
  const PlanMentions b = MentionsOf(next);
  for (EntityId e : b.entities) {
    if (std::binary_search(a.entities.begin(), a.entities.end(), e)) return true;
  }
  for (RelationId r : b.relations) {
    if (std::binary_search(a.relations.begin(), a.relations.end(), r)) return true;
  }
  return false;
}

TurnState QuestionState(const QueryPlan& plan) {
  return std::visit(
      Overloaded{
          [](const RetrievePlan& p) {
            return std::holds_alternative<Lookup>(p.expr.node()) ? TurnState::kSimpleQ
                                                                 : TurnState::kLogicalQ;
          },
          [](const CountPlan&) { return TurnState::kQuantitativeCountQ; },
          [](const VerifyPlan&) { return TurnState::kBooleanQ; },
          [](const ArgOptPlan&) { return TurnState::kQuantitativeArgOptQ; },
          [](const ThresholdPlan&) { return TurnState::kQuantitativeThresholdQ; },
          [](const ComparativePlan& p) {
            return p.count ? TurnState::kComparativeCountQ : TurnState::kComparativeQ;
          },
      },
      plan.node);
}

std::variant<EntityId, Ambiguous> ResolveCoreference(const KgStore& store,
                                                     const DialogContext& context,
                                                     TypeId type) {
  store.CheckType(type);
  std::vector<EntityId> salient;
  for (EntityId e : context.salience) {
    if (store.has_type(e, type)) salient.push_back(e);
  }
  if (salient.size() == 1) return salient[0];
  std::vector<EntityId> candidates;
  for (EntityId e : context.last_response) {
    if (store.has_type(e, type)) candidates.push_back(e);
  }
  // Fall back to the whole pair when the response alone is not ambiguous.
  if (candidates.size() < 2) candidates = salient;
  if (candidates.empty()) {
    throw Error("dialog", "no " + store.label(type) + " in the previous turn pair");
  }
  return Ambiguous{std::move(candidates)};
}

std::vector<DialogTurn> ClarificationExchange(const KgStore& store,
                                              const std::vector<EntityId>& candidates,
                                              EntityId intended, const QueryPlan& plan,
                                              Rng& rng) {
  if (candidates.size() < 2) throw Error("dialog", "clarification needs two candidates");
  if (!Contains(candidates, intended)) {
    throw Error("dialog", store.label(intended) + " is not among the candidates");
  }
  const EntityId guess = rng.Pick(candidates);
  DialogTurn ask{Speaker::kSystem, TurnState::kClarificationQ,
                 "Did you mean " + store.label(guess) + " ?", {guess}, {}, {}, {}};
  DialogTurn reply{Speaker::kUser, TurnState::kClarificationA, "Yes", {}, plan, {}, {}};
  if (guess != intended) {
    reply.utterance = "No, I meant " + store.label(intended) +
                      ". Could you tell me the answer for that?";
    reply.entities = {intended};
  }
  return {std::move(ask), std::move(reply)};
}

std::string NumberWords(uint64_t n) {
  static const char* kSmall[] = {"zero",    "one",     "two",       "three",    "four",
                                 "five",    "six",     "seven",     "eight",    "nine",
                                 "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                 "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  static const char* kTens[] = {"",      "",      "twenty",  "thirty", "forty",
                                "fifty", "sixty", "seventy", "eighty", "ninety"};
  static const std::pair<uint64_t, const char*> kScales[] = {
      {1000000000000000000ULL, "quintillion"}, {1000000000000000ULL, "quadrillion"},
      {1000000000000ULL, "trillion"},          {1000000000ULL, "billion"},
      {1000000ULL, "million"},                 {1000ULL, "thousand"}};
  if (n < 20) return kSmall[n];
  if (n < 100) {
    return std::string(kTens[n / 10]) + (n % 10 ? std::string("-") + kSmall[n % 10] : "");
  }
  if (n < 1000) {
    return std::string(kSmall[n / 100]) + " hundred" +
           (n % 100 ? " " + NumberWords(n % 100) : "");
  }
  for (const auto& [scale, word] : kScales) {
    if (n >= scale) {
      return NumberWords(n / scale) + " " + word +
             (n % scale ? " " + NumberWords(n % scale) : "");
    }
  }
  return "";
}

std::string RenderAnswerText(const KgStore& store, const AnswerSet& answer,
                             bool number_words) {
  return std::visit(
      Overloaded{
          [&](const EntityAnswer& a) {
            return a.entities.empty() ? std::string("None") : JoinLabels(store, a.entities.ids());
          },
          [&](const CountAnswer& a) {
            std::vector<std::string> parts;
            for (const CountEntry& c : a.counts) {
              parts.push_back(number_words ? NumberWords(c.count) : std::to_string(c.count));
            }
            return parts.empty() ? std::string("0") : Respectively(parts);
          },
          [&](const BooleanAnswer& a) {
            std::vector<std::string> parts;
            for (bool v : a.values) parts.push_back(v ? "YES" : "NO");
            return parts.empty() ? std::string("NO") : Respectively(parts);
          },
      },
      answer);
}

std::vector<DialogTurn> RenderResponse(const KgStore& store, const AnswerSet& answer,
                                       const DialogConfig& config, Rng& rng) {
  const std::vector<EntityId> entities = AnswerEntities(answer);
  if (std::holds_alternative<EntityAnswer>(answer) && entities.size() > config.display_limit) {
    std::vector<EntityId> sample = entities;
    rng.Shuffle(sample);
    sample.resize(std::min(config.sample_size, sample.size()));
    std::sort(sample.begin(), sample.end());
    const std::string count = config.number_words ? NumberWords(entities.size())
                                                  : std::to_string(entities.size());
    return {
        DialogTurn{Speaker::kSystem, TurnState::kLargeAnswerNegotiation,
                   "The answer count is " + count + ". Do you want to see all possibilities?",
                   {}, {}, answer, {}},
        DialogTurn{Speaker::kUser, TurnState::kLargeAnswerNegotiation,
                   "No, show only a few of them", {}, {}, {}, {}},
        DialogTurn{Speaker::kSystem, TurnState::kResponse, JoinLabels(store, sample), sample,
                   {}, answer, {}},
    };
  }
  return {DialogTurn{Speaker::kSystem, TurnState::kResponse,
                     RenderAnswerText(store, answer, config.number_words), entities, {},
                     answer, {}}};
}

void AdvanceContext(DialogContext& context, const QueryPlan& plan, const AnswerSet& answer) {
  const PlanMentions mentions = MentionsOf(plan);
  context.last_response = AnswerEntities(answer);
  context.salience = context.last_response;
  for (EntityId e : mentions.entities) {
    if (!Contains(context.salience, e)) context.salience.push_back(e);
  }
  context.last_plan = plan;
  context.last_answer = answer;
  context.last_relation = mentions.relations.empty()
                              ? std::nullopt
                              : std::optional<RelationId>(mentions.relations.front());
  context.pending_ambiguity.clear();
}

// --- Generator ---------------------------------------------------------------

DialogGenerator::DialogGenerator(const KgStore& store, std::vector<QuestionTemplate> templates,
                                 DialogConfig config)
    : store_(store), config_(std::move(config)) {
  for (const auto& [name, w] : config_.transition_weights) {
    if (std::find(TransformNames().begin(), TransformNames().end(), name) ==
        TransformNames().end()) {
      throw Error("dialog", "unknown transform '" + name + "' in transition weights");
    }
    if (w < 0) throw Error("dialog", "negative transition weight for " + name);
  }
  auto add = [&](QuestionTemplate t) {
    if (auto state = SchemaState(t.plan_schema)) pools_[*state].push_back(std::move(t));
  };
  auto try_add = [&](auto&& make) {
    try {
      add(make());
    } catch (const Error&) {
      // Not every wording supports every transform.
    }
  };
  for (QuestionTemplate& t : templates) {
    if (IsSimpleTemplate(t)) simple_.push_back(t);
    add(std::move(t));
  }
  if (simple_.empty()) throw Error("dialog", "no simple question template");

  for (const QuestionTemplate& t : simple_) {
    for (LogicalOp op : {LogicalOp::kAnd, LogicalOp::kOr, LogicalOp::kButNot}) {
      try_add([&] { return TransformLogical(t, op); });
    }
    try_add([&] { return TransformToCount(t); });
    try_add([&] { return TransformToCount(TransformLogical(t, LogicalOp::kOr)); });
    try_add([&] { return TransformArgOpt(t, Extremum::kMax); });
    try_add([&] { return TransformArgOpt(t, Extremum::kMin); });
    for (Comparator c : {Comparator::kAtLeast, Comparator::kAtMost, Comparator::kEqual,
                         Comparator::kApprox}) {
      try_add([&] { return TransformThreshold(t, c); });
    }
    try_add([&] { return TransformToCount(TransformThreshold(t, Comparator::kAtLeast)); });
    for (Comparison c : {Comparison::kMore, Comparison::kLess}) {
      try_add([&] { return TransformComparative(t, c); });
      try_add([&] { return TransformToCount(TransformComparative(t, c)); });
    }
    try_add([&] { return TransformVerify(t, 1); });
    try_add([&] { return TransformVerify(t, 2); });
  }
  // A few partners per template keep the pool linear in the template count.
  const size_t n = simple_.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 1; j < n && j <= 4; ++j) {
      const QuestionTemplate& a = simple_[i];
      const QuestionTemplate& b = simple_[(i + j) % n];
      if (a.paraphrase_group == b.paraphrase_group) continue;
      for (LogicalOp op : {LogicalOp::kAnd, LogicalOp::kOr}) {
        try_add([&] { return TransformMultiRelation(a, b, op); });
      }
    }
  }
}

const std::vector<QuestionTemplate>& DialogGenerator::pool(TurnState state) const {
  static const std::vector<QuestionTemplate> kEmpty;
  auto it = pools_.find(state);
  return it == pools_.end() ? kEmpty : it->second;
}

namespace {
bool Accepts(const PlanFilter& accept, const QueryPlan& plan) {
  return !accept || accept(plan);
}
}  // namespace

std::vector<DialogTurn> DialogGenerator::Answer(DialogContext& context, const QueryPlan& plan,
                                                const AnswerSet& answer, Rng& rng) const {
  std::vector<DialogTurn> turns = RenderResponse(store_, answer, config_, rng);
  AdvanceContext(context, plan, answer);
  return turns;
}

std::optional<std::vector<DialogTurn>> DialogGenerator::Emit(DialogContext& context,
                                                             TurnState state,
                                                             const Instantiation& inst,
                                                             Rng& rng) const {
  std::vector<DialogTurn> turns{DialogTurn{Speaker::kUser, state, inst.question,
                                           BoundEntities(inst.bindings), inst.plan, {}, {}}};
  for (DialogTurn& t : Answer(context, inst.plan, inst.answer, rng)) turns.push_back(std::move(t));
  return turns;
}

std::vector<DialogTurn> DialogGenerator::Start(DialogContext& context, Rng& rng,
                                               const PlanFilter& accept) const {
  context = DialogContext{};
  InstantiateOptions options{config_.answer_cap, 0, config_.exec};
  std::vector<size_t> order(simple_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const int rounds = accept ? 8 : 1;
  for (int round = 0; round < rounds; ++round) {
    rng.Shuffle(order);
    for (size_t i : order) {
      auto inst = SampleInstantiation(store_, simple_[i], rng, options, 10);
      if (inst && Accepts(accept, inst->plan)) {
        return *Emit(context, TurnState::kSimpleQ, *inst, rng);
      }
    }
  }
  throw Error("dialog", "no template can be instantiated over this store");
}

std::optional<DialogGenerator::Candidate> DialogGenerator::LinkedQuestion(
    const DialogContext& context, TurnState state, Rng& rng, int tries,
    const PlanFilter& accept) const {
  const std::vector<QuestionTemplate>& templates = pool(state);
  if (templates.empty() || !context.last_plan) return std::nullopt;
  const PlanMentions prev = MentionsOf(*context.last_plan);
  InstantiateOptions options{config_.answer_cap, 0, config_.exec};
  for (int i = 0; i < tries; ++i) {
    const QuestionTemplate& t = rng.Pick(templates);
    Bindings preset;
    if (t.entity_types.count(1) && !prev.entities.empty() &&
        (prev.relations.empty() || rng.Bernoulli(0.5))) {
      preset.entity[1] = rng.Pick(prev.entities);
    } else if (!prev.relations.empty()) {
      preset.relation[1] = rng.Pick(prev.relations);
    }
    auto inst = SampleInstantiation(store_, t, rng, options, 3, preset);
    if (inst && Linked(*context.last_plan, inst->plan) && Accepts(accept, inst->plan)) {
      return Candidate{&t, std::move(*inst)};
    }
  }
  return std::nullopt;
}

std::optional<std::vector<DialogTurn>> DialogGenerator::Coreference(DialogContext& context,
                                                                    Rng& rng,
                                                                    bool ambiguous,
                                                                    const PlanFilter& accept) const {
  // (referent, mention type, candidates when ambiguous)
  struct Target {
    EntityId entity;
    TypeId type;
    std::vector<EntityId> candidates;
  };
  std::vector<Target> targets;
  std::set<TypeId> types;
  for (EntityId e : context.salience) {
    for (TypeId ty : store_.types_of(e)) types.insert(ty);
  }
  for (TypeId ty : types) {
    const auto resolved = ResolveCoreference(store_, context, ty);
    if (const EntityId* e = std::get_if<EntityId>(&resolved)) {
      if (!ambiguous) targets.push_back({*e, ty, {}});
    } else if (ambiguous) {
      const auto& cands = std::get<Ambiguous>(resolved).candidates;
      if (cands.size() >= 2) targets.push_back({rng.Pick(cands), ty, cands});
    }
  }
  if (targets.empty()) return std::nullopt;
  rng.Shuffle(targets);
  const PlanMentions prev = MentionsOf(*context.last_plan);
  InstantiateOptions options{config_.answer_cap, 0, config_.exec};

  for (size_t ti = 0; ti < targets.size() && ti < 6; ++ti) {
    const Target& target = targets[ti];
    const bool in_question = std::binary_search(prev.entities.begin(), prev.entities.end(),
                                                target.entity);
    for (int attempt = 0; attempt < 8; ++attempt) {
      const QuestionTemplate& t = rng.Pick(simple_);
      const std::string& slot = t.entity_types.at(1);
      const size_t colon = slot.find(':');
      const std::string name = slot.substr(0, colon);
      const int index = std::stoi(slot.substr(colon + 1));
      if (auto fixed = t.fixed.find(slot);
          fixed != t.fixed.end() && store_.type(fixed->second) != target.type) {
        continue;
      }
      Bindings preset;
      preset.entity[1] = target.entity;
      (name == "subject_type" ? preset.subject_type : preset.object_type)[index] = target.type;
      if (!in_question && !prev.relations.empty()) {
        preset.relation[1] = rng.Pick(prev.relations);
      }
      auto inst = SampleInstantiation(store_, t, rng, options, 3, preset);
      if (!inst || !Linked(*context.last_plan, inst->plan)) continue;
      if (!Accepts(accept, inst->plan)) continue;

      const std::string mention = "that " + store_.label(target.type);
      DialogTurn question{Speaker::kUser,
                          TurnState::kCoreferenceQ,
                          RenderSurface(store_, t, inst->bindings, 0, {{1, mention}}),
                          BoundEntities(inst->bindings, 1),
                          {},
                          {},
                          target.type};
      std::vector<DialogTurn> turns;
      if (ambiguous) {
        context.pending_ambiguity = target.candidates;
        turns.push_back(std::move(question));
        for (DialogTurn& c : ClarificationExchange(store_, target.candidates, target.entity,
                                                   inst->plan, rng)) {
          turns.push_back(std::move(c));
        }
      } else {
        question.plan = inst->plan;
        turns.push_back(std::move(question));
      }
      for (DialogTurn& r : Answer(context, inst->plan, inst->answer, rng)) {
        turns.push_back(std::move(r));
      }
      return turns;
    }
  }
  return std::nullopt;
}

std::optional<std::vector<DialogTurn>> DialogGenerator::Ellipsis(
    DialogContext& context, Rng& rng, const PlanFilter& accept) const {
  const QueryPlan& prev = *context.last_plan;
  const Lookup* base = nullptr;
  std::optional<SetExpr> counted;
  if (const auto* r = std::get_if<RetrievePlan>(&prev.node)) {
    base = std::get_if<Lookup>(&r->expr.node());
  } else if (const auto* c = std::get_if<CountPlan>(&prev.node)) {
    if (const auto* l = std::get_if<Lookup>(&c->expr.node())) {
      base = l;
      counted = c->expr;
    } else if (const auto* b = std::get_if<SetExpr::Binary>(&c->expr.node())) {
      if (b->op == SetOp::kIntersection) {
        base = std::get_if<Lookup>(&b->rhs->node());
        counted = c->expr;
      }
    }
  }
  if (!base) return std::nullopt;

  // Entities in the anchor role of the same relation.
  std::vector<EntityId> anchors;
  for (const Tuple& t : store_.tuples()) {
    if (t.relation != base->relation) continue;
    const EntityId a = base->direction == Direction::kObject ? t.subject : t.object;
    if (a != base->anchor && (anchors.empty() || anchors.back() != a)) anchors.push_back(a);
  }
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());
  if (anchors.empty()) return std::nullopt;

  for (int attempt = 0; attempt < 8; ++attempt) {
    const EntityId x = rng.Pick(anchors);
    Lookup swapped = *base;
    swapped.anchor = x;
    std::optional<QueryPlan> plan;
    std::string utterance;
    if (counted) {
      plan = QueryPlan(CountPlan{SetExpr::Intersection(*counted, swapped)});
      utterance = "And how many of them also with " + store_.label(x) + " ?";
    } else {
      plan = QueryPlan(RetrievePlan{swapped});
      utterance = "And what about " + store_.label(x) + " ?";
    }
    const AnswerSet answer = Execute(store_, *plan, config_.exec);
    if (const auto* e = std::get_if<EntityAnswer>(&answer)) {
      if (e->entities.empty() || e->entities.size() >= config_.answer_cap) continue;
    } else if (std::get<CountAnswer>(answer).counts.front().count == 0) {
      continue;
    }
    if (!Linked(prev, *plan) || !Accepts(accept, *plan)) continue;
    std::vector<DialogTurn> turns{
        DialogTurn{Speaker::kUser, TurnState::kEllipsisQ, utterance, {x}, plan, {}, {}}};
    for (DialogTurn& r : Answer(context, *plan, answer, rng)) turns.push_back(std::move(r));
    return turns;
  }
  return std::nullopt;
}

std::optional<std::vector<DialogTurn>> DialogGenerator::Next(DialogContext& context, Rng& rng,
                                                             const PlanFilter& accept) const {
  if (!context.last_plan) return std::nullopt;
  std::vector<std::string> names = TransformNames();
  std::vector<double> weights;
  for (const std::string& n : names) {
    auto it = config_.transition_weights.find(n);
    weights.push_back(it == config_.transition_weights.end() ? 1.0 : it->second);
  }
  while (true) {
    const size_t pick = rng.Weighted(weights);
    if (pick >= names.size()) return std::nullopt;
    weights[pick] = 0;
    const std::string& name = names[pick];
    std::optional<std::vector<DialogTurn>> turns;
    if (name == "coreference") {
      const bool ambiguous = rng.Bernoulli(config_.ambiguity_rate);
      turns = Coreference(context, rng, ambiguous, accept);
      if (!turns && ambiguous) turns = Coreference(context, rng, false, accept);
    } else if (name == "ellipsis") {
      turns = Ellipsis(context, rng, accept);
    } else {
      std::vector<TurnState> states = StatesOf(name);
      rng.Shuffle(states);
      for (TurnState s : states) {
        if (auto c = LinkedQuestion(context, s, rng, 12, accept)) {
          turns = Emit(context, s, c->inst, rng);
          break;
        }
      }
    }
    if (turns) return turns;
  }
}

Dialog DialogGenerator::Generate(std::string id, uint64_t seed,
                                 const PlanFilter& accept) const {
  Rng rng(seed);
  DialogContext context;
  Dialog dialog{std::move(id), seed, Start(context, rng, accept)};
  for (size_t q = 1; q < config_.questions_per_dialog; ++q) {
    auto next = Next(context, rng, accept);
    if (!next) break;
    for (DialogTurn& t : *next) dialog.turns.push_back(std::move(t));
  }
  return dialog;
}

// --- Serialization -------------------------------------------------------------

namespace {

Json AnswerJson(const AnswerSet& answer) {
  auto ids = [](const EntitySet& s) {
    Json a = Json::array();
    for (EntityId e : s) a.push_back(e.value());
    return a;
  };
  return std::visit(
      Overloaded{
          [&](const EntityAnswer& a) {
            Json j{{"kind", "entities"}, {"entities", ids(a.entities)}};
            if (!a.partitions.empty()) {
              Json parts = Json::array();
              for (const auto& [t, s] : a.partitions) {
                parts.push_back({{"type", t.value()}, {"entities", ids(s)}});
              }
              j["partitions"] = parts;
            }
            return j;
          },
          [&](const CountAnswer& a) {
            Json counts = Json::array();
            for (const CountEntry& c : a.counts) {
              Json entry{{"count", c.count}};
              entry["type"] = c.type ? Json(c.type->value()) : Json(nullptr);
              counts.push_back(entry);
            }
            return Json{{"kind", "count"}, {"counts", counts}};
          },
          [&](const BooleanAnswer& a) {
            Json values = Json::array();
            for (bool v : a.values) values.push_back(v);
            return Json{{"kind", "boolean"}, {"values", values}};
          },
      },
      answer);
}

EntitySet IdsFrom(const Json& j) {
  std::vector<EntityId> ids;
  for (const Json& v : j) ids.emplace_back(v.get<uint32_t>());
  return EntitySet::FromUnsorted(std::move(ids));
}

AnswerSet AnswerFrom(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "entities") {
    EntityAnswer a{IdsFrom(j.at("entities")), {}};
    if (j.contains("partitions")) {
      for (const Json& p : j.at("partitions")) {
        a.partitions.emplace_back(TypeId(p.at("type").get<uint32_t>()), IdsFrom(p.at("entities")));
      }
    }
    return a;
  }
  if (kind == "count") {
    CountAnswer a;
    for (const Json& c : j.at("counts")) {
      CountEntry entry{std::nullopt, c.at("count").get<uint64_t>()};
      if (!c.at("type").is_null()) entry.type = TypeId(c.at("type").get<uint32_t>());
      a.counts.push_back(entry);
    }
    return a;
  }
  if (kind == "boolean") {
    BooleanAnswer a;
    for (const Json& v : j.at("values")) a.values.push_back(v.get<bool>());
    return a;
  }
  throw Error("parse", "unknown answer kind '" + kind + "'");
}

}  // namespace

std::string AnswerToJson(const AnswerSet& answer) { return AnswerJson(answer).dump(); }

AnswerSet AnswerFromJson(std::string_view text) {
  try {
    return AnswerFrom(Json::parse(text));
  } catch (const Json::exception& e) {
    throw Error("parse", std::string("bad answer JSON: ") + e.what());
  }
}

std::string DialogToJson(const KgStore& store, const Dialog& dialog) {
  Json turns = Json::array();
  for (const DialogTurn& t : dialog.turns) {
    Json j;
    j["speaker"] = t.speaker == Speaker::kUser ? "user" : "system";
    j["state"] = std::string(TurnStateName(t.state));
    j["utterance"] = t.utterance;
    Json ents = Json::array();
    for (EntityId e : t.entities) ents.push_back(e.value());
    j["entities"] = ents;
    if (t.plan) j["plan"] = PrintPlan(store, *t.plan);
    if (t.answer) j["answer"] = AnswerJson(*t.answer);
    if (t.mention_type) j["mention_type"] = t.mention_type->value();
    turns.push_back(std::move(j));
  }
  Json d;
  d["dialog_id"] = dialog.id;
  d["seed"] = dialog.seed;
  d["turns"] = std::move(turns);
  return d.dump();
}

Dialog DialogFromJson(const KgStore& store, std::string_view line) {
  try {
    const Json d = Json::parse(line);
    Dialog dialog{d.at("dialog_id").get<std::string>(), d.at("seed").get<uint64_t>(), {}};
    for (const Json& j : d.at("turns")) {
      DialogTurn t;
      const std::string speaker = j.at("speaker").get<std::string>();
      if (speaker != "user" && speaker != "system") {
        throw Error("parse", "unknown speaker '" + speaker + "'");
      }
      t.speaker = speaker == "user" ? Speaker::kUser : Speaker::kSystem;
      t.state = ParseTurnState(j.at("state").get<std::string>());
      t.utterance = j.at("utterance").get<std::string>();
      for (const Json& e : j.at("entities")) t.entities.emplace_back(e.get<uint32_t>());
      if (j.contains("plan")) t.plan = ParsePlan(store, j.at("plan").get<std::string>());
      if (j.contains("answer")) t.answer = AnswerFrom(j.at("answer"));
      if (j.contains("mention_type")) t.mention_type = TypeId(j.at("mention_type").get<uint32_t>());
      dialog.turns.push_back(std::move(t));
    }
    return dialog;
  } catch (const Json::exception& e) {
    throw Error("parse", std::string("bad dialog JSON: ") + e.what());
  }
}

}  // namespace convqa
