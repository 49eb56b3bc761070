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

#include "convqa/query_algebra.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace convqa {

// --- SetExpr ------------------------------------------------------------------

SetExpr SetExpr::Union(SetExpr a, SetExpr b) {
  return SetExpr(Binary{SetOp::kUnion, std::make_shared<SetExpr>(std::move(a)),
                        std::make_shared<SetExpr>(std::move(b))});
}

SetExpr SetExpr::Intersection(SetExpr a, SetExpr b) {
  return SetExpr(Binary{SetOp::kIntersection,
                        std::make_shared<SetExpr>(std::move(a)),
                        std::make_shared<SetExpr>(std::move(b))});
}

SetExpr SetExpr::Difference(SetExpr a, SetExpr b) {
  return SetExpr(Binary{SetOp::kDifference,
                        std::make_shared<SetExpr>(std::move(a)),
                        std::make_shared<SetExpr>(std::move(b))});
}

SetExpr SetExpr::Not(SetExpr a) {
  return SetExpr(Complement{std::make_shared<SetExpr>(std::move(a))});
}

SetExpr SetExpr::OfTypes(std::vector<Lookup> branches) {
  if (branches.empty()) throw Error("plan", "TypeUnion needs at least one branch");
  return SetExpr(TypeUnion{std::move(branches)});
}

bool operator==(const SetExpr& a, const SetExpr& b) {
  if (a.node_.index() != b.node_.index()) return false;
  return std::visit(
      Overloaded{
          [&](const Lookup& l) { return l == std::get<Lookup>(b.node_); },
          [&](const SetExpr::Binary& x) {
            const auto& y = std::get<SetExpr::Binary>(b.node_);
            return x.op == y.op && *x.lhs == *y.lhs && *x.rhs == *y.rhs;
          },
          [&](const SetExpr::Complement& x) {
            return *x.operand == *std::get<SetExpr::Complement>(b.node_).operand;
          },
          [&](const SetExpr::TypeUnion& x) {
            return x.branches == std::get<SetExpr::TypeUnion>(b.node_).branches;
          },
      },
      a.node_);
}

std::string_view PlanKindName(PlanKind kind) {
  switch (kind) {
    case PlanKind::kRetrieve: return "Retrieve";
    case PlanKind::kVerify: return "Verify";
    case PlanKind::kCount: return "Count";
    case PlanKind::kArgOpt: return "ArgOpt";
    case PlanKind::kThresholdFilter: return "ThresholdFilter";
    case PlanKind::kCountOverThreshold: return "CountOverThreshold";
    case PlanKind::kComparative: return "Comparative";
    case PlanKind::kCountOverComparative: return "CountOverComparative";
  }
  return "?";
}

PlanKind QueryPlan::kind() const {
  return std::visit(
      Overloaded{
          [](const RetrievePlan&) { return PlanKind::kRetrieve; },
          [](const VerifyPlan&) { return PlanKind::kVerify; },
          [](const CountPlan&) { return PlanKind::kCount; },
          [](const ArgOptPlan&) { return PlanKind::kArgOpt; },
          [](const ThresholdPlan& p) {
            return p.count ? PlanKind::kCountOverThreshold
                           : PlanKind::kThresholdFilter;
          },
          [](const ComparativePlan& p) {
            return p.count ? PlanKind::kCountOverComparative
                           : PlanKind::kComparative;
          },
      },
      node);
}

// --- Validation ---------------------------------------------------------------

namespace {

void ValidateLookup(const KgStore& store, const Lookup& l) {
  store.CheckRelation(l.relation);
  store.CheckEntity(l.anchor);
  store.CheckType(l.result_type);
}

void ValidateGroup(const KgStore& store, const GroupSpec& g) {
  store.CheckType(g.group_type);
  if (g.counted.empty()) {
    throw Error("plan", "group spec must count at least one entity type");
  }
  for (const CountedEntry& c : g.counted) {
    store.CheckRelation(c.relation);
    store.CheckType(c.counted_type);
  }
}

}  // namespace

TypeSet ResultTypes(const KgStore& store, const SetExpr& expr) {
  return std::visit(
      Overloaded{
          [&](const Lookup& l) {
            ValidateLookup(store, l);
            return TypeSet{l.result_type};
          },
          [&](const SetExpr::Binary& b) {
            TypeSet lhs = ResultTypes(store, *b.lhs);
            TypeSet rhs = ResultTypes(store, *b.rhs);
            if (lhs != rhs) {
              throw Error("type",
                          "set operation over incompatible result types");
            }
            return lhs;
          },
          [&](const SetExpr::Complement& c) {
            return ResultTypes(store, *c.operand);
          },
          [&](const SetExpr::TypeUnion& u) {
            std::vector<TypeId> types;
            for (const Lookup& l : u.branches) {
              ValidateLookup(store, l);
              if (l.anchor != u.branches.front().anchor) {
                throw Error("type", "TypeUnion branches must share an anchor");
              }
              types.push_back(l.result_type);
            }
            TypeSet set = TypeSet::FromUnsorted(types);
            if (set.size() != types.size()) {
              throw Error("type", "TypeUnion branches must differ in type");
            }
            return set;
          },
      },
      expr.node());
}

void ValidatePlan(const KgStore& store, const QueryPlan& plan) {
  std::visit(Overloaded{
                 [&](const RetrievePlan& p) { ResultTypes(store, p.expr); },
                 [&](const CountPlan& p) { ResultTypes(store, p.expr); },
                 [&](const VerifyPlan& p) {
                   if (p.facts.empty()) {
                     throw Error("plan", "Verify needs at least one fact");
                   }
                   for (const Tuple& t : p.facts) {
                     store.CheckRelation(t.relation);
                     store.CheckEntity(t.subject);
                     store.CheckEntity(t.object);
                   }
                 },
                 [&](const ArgOptPlan& p) { ValidateGroup(store, p.group); },
                 [&](const ThresholdPlan& p) { ValidateGroup(store, p.group); },
                 [&](const ComparativePlan& p) {
                   ValidateGroup(store, p.group);
                   store.CheckEntity(p.reference);
                 },
             },
             plan.node);
}

// --- Indexed execution --------------------------------------------------------

namespace {

EntitySet EvaluateLookup(const KgStore& store, const Lookup& l) {
  const EntitySet& hits = l.direction == Direction::kObject
                              ? store.objects_of(l.relation, l.anchor)
                              : store.subjects_of(l.relation, l.anchor);
  return SetIntersection(hits, store.entities_of_type(l.result_type));
}

EntitySet TypedUniverse(const KgStore& store, const TypeSet& types) {
  EntitySet out;
  for (TypeId t : types) out = SetUnion(out, store.entities_of_type(t));
  return out;
}

// Groups taking part in an aggregate, with their counts.
std::vector<std::pair<EntityId, uint64_t>> GroupCounts(
    const KgStore& store, const GroupSpec& group, const ExecOptions& options) {
  std::vector<std::pair<EntityId, uint64_t>> out;
  for (EntityId g : store.entities_of_type(group.group_type)) {
    const uint64_t c = GroupCount(store, group, g);
    if (c == 0 && !options.include_zero_groups) continue;
    out.emplace_back(g, c);
  }
  return out;
}

AnswerSet EntitiesWithPartitions(const KgStore& store, const SetExpr& expr,
                                 EntitySet entities) {
  EntityAnswer answer;
  const TypeSet types = ResultTypes(store, expr);
  if (types.size() > 1) {
    for (TypeId t : types) {
      answer.partitions.emplace_back(
          t, SetIntersection(entities, store.entities_of_type(t)));
    }
  }
  answer.entities = std::move(entities);
  return answer;
}

AnswerSet CountsOf(const KgStore& store, const SetExpr& expr,
                   const EntitySet& entities) {
  CountAnswer answer;
  const TypeSet types = ResultTypes(store, expr);
  if (types.size() > 1) {
    for (TypeId t : types) {
      answer.counts.push_back(
          {t, SetIntersection(entities, store.entities_of_type(t)).size()});
    }
  } else {
    answer.counts.push_back({std::nullopt, entities.size()});
  }
  return answer;
}

}  // namespace

EntitySet EvaluateSet(const KgStore& store, const SetExpr& expr) {
  return std::visit(
      Overloaded{
          [&](const Lookup& l) { return EvaluateLookup(store, l); },
          [&](const SetExpr::Binary& b) {
            EntitySet lhs = EvaluateSet(store, *b.lhs);
            EntitySet rhs = EvaluateSet(store, *b.rhs);
            switch (b.op) {
              case SetOp::kUnion: return SetUnion(lhs, rhs);
              case SetOp::kIntersection: return SetIntersection(lhs, rhs);
              case SetOp::kDifference: return SetDifference(lhs, rhs);
            }
            return EntitySet{};
          },
          [&](const SetExpr::Complement& c) {
            return SetDifference(
                TypedUniverse(store, ResultTypes(store, *c.operand)),
                EvaluateSet(store, *c.operand));
          },
          [&](const SetExpr::TypeUnion& u) {
            EntitySet out;
            for (const Lookup& l : u.branches) {
              out = SetUnion(out, EvaluateLookup(store, l));
            }
            return out;
          },
      },
      expr.node());
}

uint64_t GroupCount(const KgStore& store, const GroupSpec& group,
                    EntityId member) {
  uint64_t total = 0;
  for (const CountedEntry& c : group.counted) {
    const EntitySet& hits = c.direction == Direction::kObject
                                ? store.objects_of(c.relation, member)
                                : store.subjects_of(c.relation, member);
    const EntitySet& typed = store.entities_of_type(c.counted_type);
    if (hits.size() < 8) {
      for (EntityId x : hits) total += typed.contains(x);
    } else {
      total += SetIntersection(hits, typed).size();
    }
  }
  return total;
}

bool CompareCount(uint64_t count, Comparator comparator, uint64_t n) {
  switch (comparator) {
    case Comparator::kAtLeast: return count >= n;
    case Comparator::kAtMost: return count <= n;
    case Comparator::kEqual: return count == n;
    case Comparator::kApprox: {
      const auto [lo, hi] = ApproxWindow(n);
      return count >= lo && count <= hi;
    }
  }
  return false;
}

std::pair<uint64_t, uint64_t> ApproxWindow(uint64_t n) {
  const auto rounded = static_cast<uint64_t>(std::llround(0.1 * static_cast<double>(n)));
  const uint64_t delta = std::max<uint64_t>(1, rounded);
  return {n >= delta ? n - delta : 0, n + delta};
}

AnswerSet Execute(const KgStore& store, const QueryPlan& plan,
                  const ExecOptions& options) {
  ValidatePlan(store, plan);
  return std::visit(
      Overloaded{
          [&](const RetrievePlan& p) -> AnswerSet {
            return EntitiesWithPartitions(store, p.expr,
                                          EvaluateSet(store, p.expr));
          },
          [&](const CountPlan& p) -> AnswerSet {
            return CountsOf(store, p.expr, EvaluateSet(store, p.expr));
          },
          [&](const VerifyPlan& p) -> AnswerSet {
            BooleanAnswer answer;
            for (const Tuple& t : p.facts) {
              answer.values.push_back(store.contains(t));
            }
            return answer;
          },
          [&](const ArgOptPlan& p) -> AnswerSet {
            const auto counts = GroupCounts(store, p.group, options);
            std::vector<EntityId> best;
            uint64_t best_count = 0;
            for (const auto& [g, c] : counts) {
              const bool better = p.extremum == Extremum::kMax ? c > best_count
                                                               : c < best_count;
              if (best.empty() || better) {
                best = {g};
                best_count = c;
              } else if (c == best_count) {
                best.push_back(g);
              }
            }
            return EntityAnswer{EntitySet::FromSorted(std::move(best)), {}};
          },
          [&](const ThresholdPlan& p) -> AnswerSet {
            std::vector<EntityId> hits;
            for (const auto& [g, c] : GroupCounts(store, p.group, options)) {
              if (CompareCount(c, p.comparator, p.n)) hits.push_back(g);
            }
            if (p.count) return CountAnswer{{{std::nullopt, hits.size()}}};
            return EntityAnswer{EntitySet::FromSorted(std::move(hits)), {}};
          },
          [&](const ComparativePlan& p) -> AnswerSet {
            const uint64_t ref = GroupCount(store, p.group, p.reference);
            std::vector<EntityId> hits;
            for (const auto& [g, c] : GroupCounts(store, p.group, options)) {
              if (p.comparison == Comparison::kMore ? c > ref : c < ref) {
                hits.push_back(g);
              }
            }
            if (p.count) return CountAnswer{{{std::nullopt, hits.size()}}};
            return EntityAnswer{EntitySet::FromSorted(std::move(hits)), {}};
          },
      },
      plan.node);
}

SetExpr CombineExprs(const KgStore& store, SetExpr a, SetExpr b, LogicalOp op) {
  if (ResultTypes(store, a) != ResultTypes(store, b)) {
    throw Error("type", "cannot combine expressions with different result types");
  }
  switch (op) {
    case LogicalOp::kAnd: return SetExpr::Intersection(std::move(a), std::move(b));
    case LogicalOp::kOr: return SetExpr::Union(std::move(a), std::move(b));
    case LogicalOp::kButNot: return SetExpr::Difference(std::move(a), std::move(b));
  }
  return a;
}

// --- Provenance and mentions -----------------------------------------------------

namespace {

void LookupSupport(const KgStore& store, const Lookup& l,
                   std::vector<Tuple>& out) {
  const EntitySet& typed = store.entities_of_type(l.result_type);
  if (l.direction == Direction::kObject) {
    for (EntityId o : store.objects_of(l.relation, l.anchor)) {
      if (typed.contains(o)) out.push_back({l.relation, l.anchor, o});
    }
  } else {
    for (EntityId s : store.subjects_of(l.relation, l.anchor)) {
      if (typed.contains(s)) out.push_back({l.relation, s, l.anchor});
    }
  }
}

void ExprSupport(const KgStore& store, const SetExpr& expr,
                 std::vector<Tuple>& out) {
  std::visit(Overloaded{
                 [&](const Lookup& l) { LookupSupport(store, l, out); },
                 [&](const SetExpr::Binary& b) {
                   ExprSupport(store, *b.lhs, out);
                   ExprSupport(store, *b.rhs, out);
                 },
                 [&](const SetExpr::Complement& c) {
                   ExprSupport(store, *c.operand, out);
                 },
                 [&](const SetExpr::TypeUnion& u) {
                   for (const Lookup& l : u.branches) LookupSupport(store, l, out);
                 },
             },
             expr.node());
}

void MemberSupport(const KgStore& store, const GroupSpec& group, EntityId g,
                   std::vector<Tuple>& out) {
  for (const CountedEntry& c : group.counted) {
    const EntitySet& typed = store.entities_of_type(c.counted_type);
    if (c.direction == Direction::kObject) {
      for (EntityId x : store.objects_of(c.relation, g)) {
        if (typed.contains(x)) out.push_back({c.relation, g, x});
      }
    } else {
      for (EntityId x : store.subjects_of(c.relation, g)) {
        if (typed.contains(x)) out.push_back({c.relation, x, g});
      }
    }
  }
}

// Aggregate plans are attributed to the counted tuples of the selected
// group members only.
void WitnessSupport(const KgStore& store, const GroupSpec& group,
                    const QueryPlan& entity_plan, std::vector<Tuple>& out) {
  const AnswerSet answer = Execute(store, entity_plan);
  for (EntityId g : std::get<EntityAnswer>(answer).entities) {
    MemberSupport(store, group, g, out);
  }
}

void ExprMentions(const SetExpr& expr, PlanMentions& m) {
  std::visit(Overloaded{
                 [&](const Lookup& l) {
                   m.entities.push_back(l.anchor);
                   m.relations.push_back(l.relation);
                 },
                 [&](const SetExpr::Binary& b) {
                   ExprMentions(*b.lhs, m);
                   ExprMentions(*b.rhs, m);
                 },
                 [&](const SetExpr::Complement& c) { ExprMentions(*c.operand, m); },
                 [&](const SetExpr::TypeUnion& u) {
                   for (const Lookup& l : u.branches) {
                     m.entities.push_back(l.anchor);
                     m.relations.push_back(l.relation);
                   }
                 },
             },
             expr.node());
}

template <typename T>
void SortUnique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::vector<Tuple> SupportingTuples(const KgStore& store,
                                    const QueryPlan& plan) {
  ValidatePlan(store, plan);
  std::vector<Tuple> out;
  std::visit(Overloaded{
                 [&](const RetrievePlan& p) { ExprSupport(store, p.expr, out); },
                 [&](const CountPlan& p) { ExprSupport(store, p.expr, out); },
                 [&](const VerifyPlan& p) {
                   for (const Tuple& t : p.facts) {
                     if (store.contains(t)) out.push_back(t);
                   }
                 },
                 [&](const ArgOptPlan& p) {
                   WitnessSupport(store, p.group, QueryPlan(p), out);
                 },
                 [&](const ThresholdPlan& p) {
                   ThresholdPlan q = p;
                   q.count = false;
                   WitnessSupport(store, p.group, QueryPlan(q), out);
                 },
                 [&](const ComparativePlan& p) {
                   ComparativePlan q = p;
                   q.count = false;
                   WitnessSupport(store, p.group, QueryPlan(q), out);
                   MemberSupport(store, p.group, p.reference, out);
                 },
             },
             plan.node);
  SortUnique(out);
  return out;
}

PlanMentions MentionsOf(const QueryPlan& plan) {
  PlanMentions m;
  std::visit(Overloaded{
                 [&](const RetrievePlan& p) { ExprMentions(p.expr, m); },
                 [&](const CountPlan& p) { ExprMentions(p.expr, m); },
                 [&](const VerifyPlan& p) {
                   for (const Tuple& t : p.facts) {
                     m.entities.push_back(t.subject);
                     m.entities.push_back(t.object);
                     m.relations.push_back(t.relation);
                   }
                 },
                 [&](const ArgOptPlan& p) {
                   for (const auto& c : p.group.counted) m.relations.push_back(c.relation);
                 },
                 [&](const ThresholdPlan& p) {
                   for (const auto& c : p.group.counted) m.relations.push_back(c.relation);
                 },
                 [&](const ComparativePlan& p) {
                   m.entities.push_back(p.reference);
                   for (const auto& c : p.group.counted) m.relations.push_back(c.relation);
                 },
             },
             plan.node);
  SortUnique(m.entities);
  SortUnique(m.relations);
  return m;
}

}  // namespace convqa
