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

// Executable query plans over a KgStore.
//
// A plan is one of eight kinds: Retrieve, Verify, Count, ArgOpt,
// ThresholdFilter, CountOverThreshold, Comparative and CountOverComparative.
// Entity-valued plans are built from SetExpr trees whose leaves are typed
// lookups. Negation (Complement) is taken relative to the entities of the
// expression's result types, never the whole entity table.

#ifndef CONVQA_QUERY_ALGEBRA_H_
#define CONVQA_QUERY_ALGEBRA_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "convqa/common.h"
#include "convqa/kg_store.h"

namespace convqa {

// Which tuple position a lookup returns. kObject: given (relation, subject)
// return objects. kSubject: given (relation, object) return subjects.
enum class Direction { kObject, kSubject };

struct Lookup {
  Direction direction = Direction::kObject;
  RelationId relation;
  EntityId anchor;
  TypeId result_type;

  friend bool operator==(const Lookup&, const Lookup&) = default;
};

enum class SetOp { kUnion, kIntersection, kDifference };

class SetExpr {
 public:
  struct Binary {
    SetOp op;
    std::shared_ptr<const SetExpr> lhs;
    std::shared_ptr<const SetExpr> rhs;
  };
  struct Complement {
    std::shared_ptr<const SetExpr> operand;
  };
  // Lookups sharing an anchor but returning different types ("rivers and
  // lakes"). Results are partitioned per branch type.
  struct TypeUnion {
    std::vector<Lookup> branches;
  };
  using Node = std::variant<Lookup, Binary, Complement, TypeUnion>;

  SetExpr(Lookup lookup) : node_(lookup) {}  // NOLINT: implicit by design of the algebra

  static SetExpr Union(SetExpr a, SetExpr b);
  static SetExpr Intersection(SetExpr a, SetExpr b);
  static SetExpr Difference(SetExpr a, SetExpr b);
  static SetExpr Not(SetExpr a);
  static SetExpr OfTypes(std::vector<Lookup> branches);

  const Node& node() const { return node_; }

  friend bool operator==(const SetExpr& a, const SetExpr& b);

 private:
  explicit SetExpr(Node node) : node_(std::move(node)) {}
  Node node_;
};

struct CountedEntry {
  RelationId relation;
  // Position of the counted entity relative to the group entity: kObject
  // counts tuples (relation, group, x); kSubject counts (relation, x, group).
  Direction direction = Direction::kObject;
  TypeId counted_type;

  friend bool operator==(const CountedEntry&, const CountedEntry&) = default;
};

struct GroupSpec {
  TypeId group_type;
  std::vector<CountedEntry> counted;

  friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

enum class Extremum { kMin, kMax };
enum class Comparator { kAtLeast, kAtMost, kEqual, kApprox };
enum class Comparison { kMore, kLess };

struct RetrievePlan {
  SetExpr expr;
  friend bool operator==(const RetrievePlan&, const RetrievePlan&) = default;
};
struct VerifyPlan {
  std::vector<Tuple> facts;
  friend bool operator==(const VerifyPlan&, const VerifyPlan&) = default;
};
struct CountPlan {
  SetExpr expr;
  friend bool operator==(const CountPlan&, const CountPlan&) = default;
};
struct ArgOptPlan {
  GroupSpec group;
  Extremum extremum = Extremum::kMax;
  friend bool operator==(const ArgOptPlan&, const ArgOptPlan&) = default;
};
// ThresholdFilter, or CountOverThreshold when `count` is set.
struct ThresholdPlan {
  GroupSpec group;
  Comparator comparator = Comparator::kAtLeast;
  uint64_t n = 0;
  bool count = false;
  friend bool operator==(const ThresholdPlan&, const ThresholdPlan&) = default;
};
// Comparative, or CountOverComparative when `count` is set.
struct ComparativePlan {
  GroupSpec group;
  EntityId reference;
  Comparison comparison = Comparison::kMore;
  bool count = false;
  friend bool operator==(const ComparativePlan&,
                         const ComparativePlan&) = default;
};

enum class PlanKind {
  kRetrieve,
  kVerify,
  kCount,
  kArgOpt,
  kThresholdFilter,
  kCountOverThreshold,
  kComparative,
  kCountOverComparative,
};

std::string_view PlanKindName(PlanKind kind);

struct QueryPlan {
  using Node = std::variant<RetrievePlan, VerifyPlan, CountPlan, ArgOptPlan,
                            ThresholdPlan, ComparativePlan>;
  Node node;

  QueryPlan(RetrievePlan p) : node(std::move(p)) {}    // NOLINT
  QueryPlan(VerifyPlan p) : node(std::move(p)) {}      // NOLINT
  QueryPlan(CountPlan p) : node(std::move(p)) {}       // NOLINT
  QueryPlan(ArgOptPlan p) : node(std::move(p)) {}      // NOLINT
  QueryPlan(ThresholdPlan p) : node(std::move(p)) {}   // NOLINT
  QueryPlan(ComparativePlan p) : node(std::move(p)) {} // NOLINT

  PlanKind kind() const;

  friend bool operator==(const QueryPlan&, const QueryPlan&) = default;
};

// --- Answers ---------------------------------------------------------------

struct EntityAnswer {
  EntitySet entities;
  // One entry per result type when the expression spans several types.
  std::vector<std::pair<TypeId, EntitySet>> partitions;
  friend bool operator==(const EntityAnswer&, const EntityAnswer&) = default;
};

struct CountEntry {
  std::optional<TypeId> type;
  uint64_t count = 0;
  friend bool operator==(const CountEntry&, const CountEntry&) = default;
};

struct CountAnswer {
  std::vector<CountEntry> counts;
  friend bool operator==(const CountAnswer&, const CountAnswer&) = default;
};

struct BooleanAnswer {
  std::vector<bool> values;
  friend bool operator==(const BooleanAnswer&, const BooleanAnswer&) = default;
};

using AnswerSet = std::variant<EntityAnswer, CountAnswer, BooleanAnswer>;

// --- Execution --------------------------------------------------------------

struct ExecOptions {
  // Group members with no counted tuples take part in ArgOpt, threshold and
  // comparative plans with count 0.
  bool include_zero_groups = true;
};

// Result types of an expression. Throws Error("type") when combined branches
// disagree, Error("unknown_id") for ids outside the store.
TypeSet ResultTypes(const KgStore& store, const SetExpr& expr);

// Throws on unknown ids or malformed plans without executing anything.
void ValidatePlan(const KgStore& store, const QueryPlan& plan);

EntitySet EvaluateSet(const KgStore& store, const SetExpr& expr);
uint64_t GroupCount(const KgStore& store, const GroupSpec& group,
                    EntityId member);

AnswerSet Execute(const KgStore& store, const QueryPlan& plan,
                  const ExecOptions& options = {});

// Exhaustive re-implementation of Execute() that reads only the raw tuple and
// membership lists. Refuses stores above kBruteForceTupleLimit tuples.
inline constexpr size_t kBruteForceTupleLimit = 100000;
AnswerSet BruteForceExecute(const KgStore& store, const QueryPlan& plan,
                            const ExecOptions& options = {});

// Inclusive interval matched by "approximately n": n +/- max(1, round(n/10)),
// clamped below at zero.
std::pair<uint64_t, uint64_t> ApproxWindow(uint64_t n);

bool CompareCount(uint64_t count, Comparator comparator, uint64_t n);

enum class LogicalOp { kAnd, kOr, kButNot };

// Combines two expressions (typically lookups over different relations) with
// a logical connective. Throws Error("type") if result types differ.
SetExpr CombineExprs(const KgStore& store, SetExpr a, SetExpr b, LogicalOp op);

// Tuples the plan's answer is derived from; used for split provenance.
// Aggregate plans contribute the counted tuples of the selected group
// members (plus the comparative reference), not the whole group.
std::vector<Tuple> SupportingTuples(const KgStore& store,
                                    const QueryPlan& plan);

// Entities and relations named by a plan (anchors, references, verified
// facts). Used for dialog linking checks.
struct PlanMentions {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
};
PlanMentions MentionsOf(const QueryPlan& plan);

}  // namespace convqa

#endif  // CONVQA_QUERY_ALGEBRA_H_
