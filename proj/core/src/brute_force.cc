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

// Reference semantics for query plans. Everything here is recomputed from
// KgStore::tuples() and KgStore::type_memberships() with plain loops; none of
// the store's indices and none of the helpers in query_algebra.cc are used.

#include <map>
#include <set>
#include <string>

#include "convqa/query_algebra.h"

namespace convqa {
namespace {

class Oracle {
 public:
  Oracle(const KgStore& store, const ExecOptions& options)
      : store_(store), options_(options) {
    for (const auto& [e, t] : store.type_memberships()) typed_.insert({e, t});
  }

  AnswerSet Run(const QueryPlan& plan) {
    return std::visit(
        Overloaded{
            [&](const RetrievePlan& p) -> AnswerSet {
              std::set<EntityId> all = Eval(p.expr);
              EntityAnswer answer;
              answer.entities = ToSet(all);
              const std::set<TypeId> types = Types(p.expr);
              if (types.size() > 1) {
                for (TypeId t : types) {
                  std::set<EntityId> part;
                  for (EntityId e : all) {
                    if (HasType(e, t)) part.insert(e);
                  }
                  answer.partitions.emplace_back(t, ToSet(part));
                }
              }
              return answer;
            },
            [&](const CountPlan& p) -> AnswerSet {
              std::set<EntityId> all = Eval(p.expr);
              const std::set<TypeId> types = Types(p.expr);
              CountAnswer answer;
              if (types.size() > 1) {
                for (TypeId t : types) {
                  uint64_t n = 0;
                  for (EntityId e : all) n += HasType(e, t) ? 1 : 0;
                  answer.counts.push_back({t, n});
                }
              } else {
                answer.counts.push_back({std::nullopt, all.size()});
              }
              return answer;
            },
            [&](const VerifyPlan& p) -> AnswerSet {
              if (p.facts.empty()) throw Error("plan", "Verify needs a fact");
              BooleanAnswer answer;
              for (const Tuple& f : p.facts) {
                CheckIds(f.relation);
                CheckEntity(f.subject);
                CheckEntity(f.object);
                bool found = false;
                for (const Tuple& t : store_.tuples()) {
                  if (t.relation == f.relation && t.subject == f.subject &&
                      t.object == f.object) {
                    found = true;
                  }
                }
                answer.values.push_back(found);
              }
              return answer;
            },
            [&](const ArgOptPlan& p) -> AnswerSet {
              std::map<EntityId, uint64_t> counts = Groups(p.group);
              std::set<EntityId> best;
              bool have = false;
              uint64_t best_count = 0;
              for (const auto& [g, c] : counts) {
                if (!have) {
                  best_count = c;
                  have = true;
                } else if (p.extremum == Extremum::kMax) {
                  best_count = std::max(best_count, c);
                } else {
                  best_count = std::min(best_count, c);
                }
              }
              for (const auto& [g, c] : counts) {
                if (c == best_count) best.insert(g);
              }
              return EntityAnswer{ToSet(best), {}};
            },
            [&](const ThresholdPlan& p) -> AnswerSet {
              std::set<EntityId> hits;
              for (const auto& [g, c] : Groups(p.group)) {
                if (Matches(c, p.comparator, p.n)) hits.insert(g);
              }
              if (p.count) return CountAnswer{{{std::nullopt, hits.size()}}};
              return EntityAnswer{ToSet(hits), {}};
            },
            [&](const ComparativePlan& p) -> AnswerSet {
              std::map<EntityId, uint64_t> counts = Groups(p.group);
              CheckEntity(p.reference);
              const uint64_t ref = CountFor(p.group, p.reference);
              std::set<EntityId> hits;
              for (const auto& [g, c] : counts) {
                if (p.comparison == Comparison::kMore ? c > ref : c < ref) {
                  hits.insert(g);
                }
              }
              if (p.count) return CountAnswer{{{std::nullopt, hits.size()}}};
              return EntityAnswer{ToSet(hits), {}};
            },
        },
        plan.node);
  }

 private:
  static EntitySet ToSet(const std::set<EntityId>& s) {
    return EntitySet::FromSorted(std::vector<EntityId>(s.begin(), s.end()));
  }

  void CheckEntity(EntityId e) const {
    if (e.value() >= store_.num_entities()) {
      throw Error("unknown_id", "unknown entity id " + std::to_string(e.value()));
    }
  }
  void CheckIds(RelationId r) const {
    if (r.value() >= store_.num_relations()) {
      throw Error("unknown_id", "unknown relation id " + std::to_string(r.value()));
    }
  }
  void CheckType(TypeId t) const {
    if (t.value() >= store_.num_types()) {
      throw Error("unknown_id", "unknown type id " + std::to_string(t.value()));
    }
  }

  bool HasType(EntityId e, TypeId t) const { return typed_.count({e, t}) > 0; }

  std::set<EntityId> LookupSet(const Lookup& l) const {
    CheckIds(l.relation);
    CheckEntity(l.anchor);
    CheckType(l.result_type);
    std::set<EntityId> out;
    for (const Tuple& t : store_.tuples()) {
      if (t.relation != l.relation) continue;
      if (l.direction == Direction::kObject && t.subject == l.anchor &&
          HasType(t.object, l.result_type)) {
        out.insert(t.object);
      }
      if (l.direction == Direction::kSubject && t.object == l.anchor &&
          HasType(t.subject, l.result_type)) {
        out.insert(t.subject);
      }
    }
    return out;
  }

  std::set<TypeId> Types(const SetExpr& expr) const {
    return std::visit(
        Overloaded{
            [&](const Lookup& l) { return std::set<TypeId>{l.result_type}; },
            [&](const SetExpr::Binary& b) {
              auto lhs = Types(*b.lhs);
              if (lhs != Types(*b.rhs)) {
                throw Error("type", "incompatible result types");
              }
              return lhs;
            },
            [&](const SetExpr::Complement& c) { return Types(*c.operand); },
            [&](const SetExpr::TypeUnion& u) {
              std::set<TypeId> out;
              for (const Lookup& l : u.branches) {
                if (l.anchor != u.branches.front().anchor ||
                    !out.insert(l.result_type).second) {
                  throw Error("type", "malformed TypeUnion");
                }
              }
              return out;
            },
        },
        expr.node());
  }

  std::set<EntityId> Eval(const SetExpr& expr) const {
    Types(expr);
    return std::visit(
        Overloaded{
            [&](const Lookup& l) { return LookupSet(l); },
            [&](const SetExpr::Binary& b) {
              std::set<EntityId> lhs = Eval(*b.lhs);
              std::set<EntityId> rhs = Eval(*b.rhs);
              std::set<EntityId> out;
              if (b.op == SetOp::kUnion) {
                out = lhs;
                out.insert(rhs.begin(), rhs.end());
              } else {
                for (EntityId e : lhs) {
                  const bool in_rhs = rhs.count(e) > 0;
                  if ((b.op == SetOp::kIntersection) == in_rhs) out.insert(e);
                }
              }
              return out;
            },
            [&](const SetExpr::Complement& c) {
              const std::set<TypeId> types = Types(*c.operand);
              std::set<EntityId> inner = Eval(*c.operand);
              std::set<EntityId> out;
              for (uint32_t i = 0; i < store_.num_entities(); ++i) {
                const EntityId e(i);
                bool typed = false;
                for (TypeId t : types) typed = typed || HasType(e, t);
                if (typed && !inner.count(e)) out.insert(e);
              }
              return out;
            },
            [&](const SetExpr::TypeUnion& u) {
              std::set<EntityId> out;
              for (const Lookup& l : u.branches) {
                auto part = LookupSet(l);
                out.insert(part.begin(), part.end());
              }
              return out;
            },
        },
        expr.node());
  }

  // One pass over all tuples; every tuple credits the group entity at its
  // grouping end when the other end has the counted type.
  std::map<EntityId, uint64_t> AllCounts(const GroupSpec& group) const {
    std::map<EntityId, uint64_t> out;
    for (const Tuple& t : store_.tuples()) {
      for (const CountedEntry& c : group.counted) {
        if (t.relation != c.relation) continue;
        const EntityId g = c.direction == Direction::kObject ? t.subject : t.object;
        const EntityId x = c.direction == Direction::kObject ? t.object : t.subject;
        if (HasType(x, c.counted_type)) ++out[g];
      }
    }
    return out;
  }

  uint64_t CountFor(const GroupSpec& group, EntityId g) const {
    const auto all = AllCounts(group);
    auto it = all.find(g);
    return it == all.end() ? 0 : it->second;
  }

  std::map<EntityId, uint64_t> Groups(const GroupSpec& group) const {
    CheckType(group.group_type);
    if (group.counted.empty()) throw Error("plan", "empty group spec");
    for (const CountedEntry& c : group.counted) {
      CheckIds(c.relation);
      CheckType(c.counted_type);
    }
    const auto all = AllCounts(group);
    std::map<EntityId, uint64_t> out;
    for (const auto& [e, t] : typed_) {
      if (t != group.group_type) continue;
      auto it = all.find(e);
      const uint64_t c = it == all.end() ? 0 : it->second;
      if (c == 0 && !options_.include_zero_groups) continue;
      out[e] = c;
    }
    return out;
  }

  static bool Matches(uint64_t c, Comparator cmp, uint64_t n) {
    switch (cmp) {
      case Comparator::kAtLeast: return c >= n;
      case Comparator::kAtMost: return c <= n;
      case Comparator::kEqual: return c == n;
      case Comparator::kApprox: {
        // delta = max(1, round(n / 10)), rounding half up on integers.
        uint64_t delta = (n + 5) / 10;
        if (delta < 1) delta = 1;
        const uint64_t lo = n > delta ? n - delta : 0;
        return c >= lo && c <= n + delta;
      }
    }
    return false;
  }

  const KgStore& store_;
  ExecOptions options_;
  std::set<std::pair<EntityId, TypeId>> typed_;
};

}  // namespace

AnswerSet BruteForceExecute(const KgStore& store, const QueryPlan& plan,
                            const ExecOptions& options) {
  if (store.tuples().size() > kBruteForceTupleLimit) {
    throw Error("guard", "brute-force execution is limited to " +
                             std::to_string(kBruteForceTupleLimit) + " tuples");
  }
  return Oracle(store, options).Run(plan);
}

}  // namespace convqa
