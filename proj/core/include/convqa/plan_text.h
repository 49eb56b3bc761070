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

// Canonical text form of query plans, one plan per line:
//
//   Retrieve(Intersection(Lookup(obj, flows_through, India, river),
//                         Lookup(obj, flows_through, China, river)))
//   Count(TypeUnion(Lookup(obj, r, India, river), Lookup(obj, r, India, lake)))
//   Verify((flows_through, India, Ganga), (flows_through, India, Mekong))
//   ArgOpt(Group(country, (flows_through, obj, river)), max)
//   ThresholdFilter(Group(river, (flows_through, subj, country)), atleast, 2)
//   CountOverComparative(Group(country, (flows_through, obj, river)), Egypt, more)
//
// Other set nodes: Union, Difference, Complement. Comparators: atleast,
// atmost, equal, approx. Identifiers are labels; a label that is not a plain
// token is written as a double-quoted string, and an entity whose label is
// shared with another entity is written as #<dense id>.
//
// Parsing happens in two stages. ParseSyntax() produces an untyped tree in
// which any atom may be a template slot marker such as ⟨entity:1⟩;
// ResolvePlan() binds the tree against a store.

#ifndef CONVQA_PLAN_TEXT_H_
#define CONVQA_PLAN_TEXT_H_

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "convqa/kg_store.h"
#include "convqa/query_algebra.h"

namespace convqa {

struct SyntaxNode {
  // For calls: the head identifier (empty for a bare parenthesized group).
  // For atoms: the atom text with quotes removed.
  std::string text;
  bool is_call = false;
  bool quoted = false;
  std::vector<SyntaxNode> args;

  static SyntaxNode Atom(std::string text, bool quoted = false) {
    return SyntaxNode{std::move(text), false, quoted, {}};
  }
  static SyntaxNode Call(std::string head, std::vector<SyntaxNode> args) {
    return SyntaxNode{std::move(head), true, false, std::move(args)};
  }

  friend bool operator==(const SyntaxNode&, const SyntaxNode&) = default;
};

// Throws Error("parse") with a character offset on malformed input.
SyntaxNode ParseSyntax(std::string_view text);
std::string PrintSyntax(const SyntaxNode& node);

// Visits every atom, depth first.
void ForEachAtom(const SyntaxNode& node,
                 const std::function<void(const SyntaxNode&)>& fn);

// Replaces unquoted atoms whose text is a key of `bindings`.
SyntaxNode Substitute(const SyntaxNode& node,
                      const std::map<std::string, SyntaxNode>& bindings);

// Resolves labels against `store`. Throws Error("parse") for structural
// problems and Error("unknown_id") for labels the store does not know.
QueryPlan ResolvePlan(const KgStore& store, const SyntaxNode& node);
SetExpr ResolveSetExpr(const KgStore& store, const SyntaxNode& node);

QueryPlan ParsePlan(const KgStore& store, std::string_view text);
std::string PrintPlan(const KgStore& store, const QueryPlan& plan);
std::string PrintSetExpr(const KgStore& store, const SetExpr& expr);

// Atom that refers unambiguously to the given id when parsed back.
SyntaxNode EntityAtom(const KgStore& store, EntityId id);
SyntaxNode RelationAtom(const KgStore& store, RelationId id);
SyntaxNode TypeAtom(const KgStore& store, TypeId id);

}  // namespace convqa

#endif  // CONVQA_PLAN_TEXT_H_
