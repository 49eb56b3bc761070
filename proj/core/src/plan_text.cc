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

#include "convqa/plan_text.h"

#include <cctype>
#include <charconv>

namespace convqa {
namespace {

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

bool IsDelimiter(char c) { return c == '(' || c == ')' || c == ',' || c == '"'; }

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  SyntaxNode ParseAll() {
    SyntaxNode node = ParseNode();
    SkipSpace();
    if (pos_ != text_.size()) Fail("trailing input");
    return node;
  }

 private:
  [[noreturn]] void Fail(const std::string& what) const {
    throw Error("parse", "plan text offset " + std::to_string(pos_) + ": " + what);
  }

  void SkipSpace() {
    while (pos_ < text_.size() && IsSpace(text_[pos_])) ++pos_;
  }

  SyntaxNode ParseNode() {
    SkipSpace();
    if (pos_ >= text_.size()) Fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '"') return SyntaxNode::Atom(ParseQuoted(), true);
    if (c == '(') return SyntaxNode::Call("", ParseArgs());
    if (c == ')' || c == ',') Fail(std::string("unexpected '") + c + "'");

    const size_t start = pos_;
    while (pos_ < text_.size() && !IsDelimiter(text_[pos_])) ++pos_;
    std::string_view token = text_.substr(start, pos_ - start);
    while (!token.empty() && IsSpace(token.back())) token.remove_suffix(1);
    if (pos_ < text_.size() && text_[pos_] == '(') {
      for (char ch : token) {
        if (IsSpace(ch)) Fail("call head may not contain whitespace");
      }
      return SyntaxNode::Call(std::string(token), ParseArgs());
    }
    return SyntaxNode::Atom(std::string(token));
  }

  std::string ParseQuoted() {
    ++pos_;  // opening quote
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') {
        ++pos_;
        if (pos_ >= text_.size()) break;
      }
      out.push_back(text_[pos_++]);
    }
    if (pos_ >= text_.size()) Fail("unterminated string");
    ++pos_;
    return out;
  }

  std::vector<SyntaxNode> ParseArgs() {
    ++pos_;  // '('
    std::vector<SyntaxNode> args;
    SkipSpace();
    if (pos_ < text_.size() && text_[pos_] == ')') {
      ++pos_;
      return args;
    }
    while (true) {
      args.push_back(ParseNode());
      SkipSpace();
      if (pos_ >= text_.size()) Fail("missing ')'");
      if (text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (text_[pos_] == ')') {
        ++pos_;
        return args;
      }
      Fail("expected ',' or ')'");
    }
  }

  std::string_view text_;
  size_t pos_ = 0;
};

bool IsPlainToken(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (IsSpace(c) || IsDelimiter(c) || c == '\\') return false;
  }
  return true;
}

std::string Quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

[[noreturn]] void Bad(const SyntaxNode& node, const std::string& what) {
  throw Error("parse", what + " in '" + PrintSyntax(node) + "'");
}

const SyntaxNode& ExpectCall(const SyntaxNode& node, std::string_view head,
                             size_t min_args, size_t max_args) {
  if (!node.is_call || node.text != head) {
    Bad(node, "expected " + std::string(head.empty() ? "(...)" : head));
  }
  if (node.args.size() < min_args || node.args.size() > max_args) {
    Bad(node, "wrong number of arguments to " + std::string(head));
  }
  return node;
}

const std::string& AtomText(const SyntaxNode& node) {
  if (node.is_call) Bad(node, "expected an identifier");
  return node.text;
}

EntityId ResolveEntity(const KgStore& store, const SyntaxNode& node) {
  const std::string& text = AtomText(node);
  if (!node.quoted && text.size() > 1 && text[0] == '#') {
    uint32_t id = 0;
    auto [ptr, ec] = std::from_chars(text.data() + 1, text.data() + text.size(), id);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      Bad(node, "malformed entity reference");
    }
    store.CheckEntity(EntityId(id));
    return EntityId(id);
  }
  return store.entity(text);
}

RelationId ResolveRelation(const KgStore& store, const SyntaxNode& node) {
  return store.relation(AtomText(node));
}

TypeId ResolveType(const KgStore& store, const SyntaxNode& node) {
  return store.type(AtomText(node));
}

Direction ResolveDirection(const SyntaxNode& node) {
  const std::string& t = AtomText(node);
  if (t == "obj" || t == "object") return Direction::kObject;
  if (t == "subj" || t == "subject") return Direction::kSubject;
  Bad(node, "direction must be obj or subj");
}

uint64_t ResolveNumber(const SyntaxNode& node) {
  const std::string& t = AtomText(node);
  uint64_t n = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    Bad(node, "expected a non-negative integer");
  }
  return n;
}

Lookup ResolveLookup(const KgStore& store, const SyntaxNode& node) {
  ExpectCall(node, "Lookup", 4, 4);
  return Lookup{ResolveDirection(node.args[0]),
                ResolveRelation(store, node.args[1]),
                ResolveEntity(store, node.args[2]),
                ResolveType(store, node.args[3])};
}

GroupSpec ResolveGroup(const KgStore& store, const SyntaxNode& node) {
  ExpectCall(node, "Group", 2, SIZE_MAX);
  GroupSpec g;
  g.group_type = ResolveType(store, node.args[0]);
  for (size_t i = 1; i < node.args.size(); ++i) {
    const SyntaxNode& entry = ExpectCall(node.args[i], "", 3, 3);
    g.counted.push_back({ResolveRelation(store, entry.args[0]),
                         ResolveDirection(entry.args[1]),
                         ResolveType(store, entry.args[2])});
  }
  return g;
}

Comparator ResolveComparator(const SyntaxNode& node) {
  const std::string& t = AtomText(node);
  if (t == "atleast") return Comparator::kAtLeast;
  if (t == "atmost") return Comparator::kAtMost;
  if (t == "equal") return Comparator::kEqual;
  if (t == "approx") return Comparator::kApprox;
  Bad(node, "comparator must be atleast, atmost, equal or approx");
}

std::string_view DirectionText(Direction d) {
  return d == Direction::kObject ? "obj" : "subj";
}

std::string_view ComparatorText(Comparator c) {
  switch (c) {
    case Comparator::kAtLeast: return "atleast";
    case Comparator::kAtMost: return "atmost";
    case Comparator::kEqual: return "equal";
    case Comparator::kApprox: return "approx";
  }
  return "?";
}

SyntaxNode LookupSyntax(const KgStore& store, const Lookup& l) {
  return SyntaxNode::Call(
      "Lookup", {SyntaxNode::Atom(std::string(DirectionText(l.direction))),
                 RelationAtom(store, l.relation), EntityAtom(store, l.anchor),
                 TypeAtom(store, l.result_type)});
}

SyntaxNode ExprSyntax(const KgStore& store, const SetExpr& expr) {
  return std::visit(
      Overloaded{
          [&](const Lookup& l) { return LookupSyntax(store, l); },
          [&](const SetExpr::Binary& b) {
            const char* head = b.op == SetOp::kUnion          ? "Union"
                               : b.op == SetOp::kIntersection ? "Intersection"
                                                              : "Difference";
            return SyntaxNode::Call(head, {ExprSyntax(store, *b.lhs),
                                           ExprSyntax(store, *b.rhs)});
          },
          [&](const SetExpr::Complement& c) {
            return SyntaxNode::Call("Complement", {ExprSyntax(store, *c.operand)});
          },
          [&](const SetExpr::TypeUnion& u) {
            std::vector<SyntaxNode> args;
            for (const Lookup& l : u.branches) args.push_back(LookupSyntax(store, l));
            return SyntaxNode::Call("TypeUnion", std::move(args));
          },
      },
      expr.node());
}

SyntaxNode GroupSyntax(const KgStore& store, const GroupSpec& g) {
  std::vector<SyntaxNode> args{TypeAtom(store, g.group_type)};
  for (const CountedEntry& c : g.counted) {
    args.push_back(SyntaxNode::Call(
        "", {RelationAtom(store, c.relation),
             SyntaxNode::Atom(std::string(DirectionText(c.direction))),
             TypeAtom(store, c.counted_type)}));
  }
  return SyntaxNode::Call("Group", std::move(args));
}

SyntaxNode PlanSyntax(const KgStore& store, const QueryPlan& plan) {
  return std::visit(
      Overloaded{
          [&](const RetrievePlan& p) {
            return SyntaxNode::Call("Retrieve", {ExprSyntax(store, p.expr)});
          },
          [&](const CountPlan& p) {
            return SyntaxNode::Call("Count", {ExprSyntax(store, p.expr)});
          },
          [&](const VerifyPlan& p) {
            std::vector<SyntaxNode> facts;
            for (const Tuple& t : p.facts) {
              facts.push_back(SyntaxNode::Call(
                  "", {RelationAtom(store, t.relation), EntityAtom(store, t.subject),
                       EntityAtom(store, t.object)}));
            }
            return SyntaxNode::Call("Verify", std::move(facts));
          },
          [&](const ArgOptPlan& p) {
            return SyntaxNode::Call(
                "ArgOpt",
                {GroupSyntax(store, p.group),
                 SyntaxNode::Atom(p.extremum == Extremum::kMax ? "max" : "min")});
          },
          [&](const ThresholdPlan& p) {
            return SyntaxNode::Call(
                p.count ? "CountOverThreshold" : "ThresholdFilter",
                {GroupSyntax(store, p.group),
                 SyntaxNode::Atom(std::string(ComparatorText(p.comparator))),
                 SyntaxNode::Atom(std::to_string(p.n))});
          },
          [&](const ComparativePlan& p) {
            return SyntaxNode::Call(
                p.count ? "CountOverComparative" : "Comparative",
                {GroupSyntax(store, p.group), EntityAtom(store, p.reference),
                 SyntaxNode::Atom(p.comparison == Comparison::kMore ? "more"
                                                                    : "less")});
          },
      },
      plan.node);
}

}  // namespace

SyntaxNode ParseSyntax(std::string_view text) { return Parser(text).ParseAll(); }

std::string PrintSyntax(const SyntaxNode& node) {
  if (!node.is_call) {
    if (!node.quoted && IsPlainToken(node.text)) return node.text;
    return Quote(node.text);
  }
  std::string out = node.text + "(";
  for (size_t i = 0; i < node.args.size(); ++i) {
    if (i) out += ", ";
    out += PrintSyntax(node.args[i]);
  }
  return out + ")";
}

void ForEachAtom(const SyntaxNode& node,
                 const std::function<void(const SyntaxNode&)>& fn) {
  if (!node.is_call) {
    fn(node);
    return;
  }
  for (const SyntaxNode& a : node.args) ForEachAtom(a, fn);
}

SyntaxNode Substitute(const SyntaxNode& node,
                      const std::map<std::string, SyntaxNode>& bindings) {
  if (!node.is_call) {
    if (node.quoted) return node;
    auto it = bindings.find(node.text);
    return it == bindings.end() ? node : it->second;
  }
  SyntaxNode out = node;
  for (SyntaxNode& a : out.args) a = Substitute(a, bindings);
  return out;
}

SetExpr ResolveSetExpr(const KgStore& store, const SyntaxNode& node) {
  if (!node.is_call) Bad(node, "expected a set expression");
  const std::string& head = node.text;
  if (head == "Lookup") return ResolveLookup(store, node);
  if (head == "Union" || head == "Intersection" || head == "Difference") {
    ExpectCall(node, head, 2, 2);
    SetExpr a = ResolveSetExpr(store, node.args[0]);
    SetExpr b = ResolveSetExpr(store, node.args[1]);
    if (head == "Union") return SetExpr::Union(std::move(a), std::move(b));
    if (head == "Intersection") {
      return SetExpr::Intersection(std::move(a), std::move(b));
    }
    return SetExpr::Difference(std::move(a), std::move(b));
  }
  if (head == "Complement") {
    ExpectCall(node, head, 1, 1);
    return SetExpr::Not(ResolveSetExpr(store, node.args[0]));
  }
  if (head == "TypeUnion") {
    ExpectCall(node, head, 1, SIZE_MAX);
    std::vector<Lookup> branches;
    for (const SyntaxNode& a : node.args) branches.push_back(ResolveLookup(store, a));
    return SetExpr::OfTypes(std::move(branches));
  }
  Bad(node, "unknown set expression '" + head + "'");
}

QueryPlan ResolvePlan(const KgStore& store, const SyntaxNode& node) {
  if (!node.is_call) Bad(node, "expected a plan");
  const std::string& head = node.text;
  if (head == "Retrieve") {
    ExpectCall(node, head, 1, 1);
    return RetrievePlan{ResolveSetExpr(store, node.args[0])};
  }
  if (head == "Count") {
    ExpectCall(node, head, 1, 1);
    return CountPlan{ResolveSetExpr(store, node.args[0])};
  }
  if (head == "Verify") {
    ExpectCall(node, head, 1, SIZE_MAX);
    VerifyPlan p;
    for (const SyntaxNode& f : node.args) {
      ExpectCall(f, "", 3, 3);
      p.facts.push_back({ResolveRelation(store, f.args[0]),
                         ResolveEntity(store, f.args[1]),
                         ResolveEntity(store, f.args[2])});
    }
    return p;
  }
  if (head == "ArgOpt") {
    ExpectCall(node, head, 2, 2);
    const std::string& e = AtomText(node.args[1]);
    if (e != "max" && e != "min") Bad(node, "ArgOpt direction must be max or min");
    return ArgOptPlan{ResolveGroup(store, node.args[0]),
                      e == "max" ? Extremum::kMax : Extremum::kMin};
  }
  if (head == "ThresholdFilter" || head == "CountOverThreshold") {
    ExpectCall(node, head, 3, 3);
    return ThresholdPlan{ResolveGroup(store, node.args[0]),
                         ResolveComparator(node.args[1]),
                         ResolveNumber(node.args[2]),
                         head == "CountOverThreshold"};
  }
  if (head == "Comparative" || head == "CountOverComparative") {
    ExpectCall(node, head, 3, 3);
    const std::string& c = AtomText(node.args[2]);
    if (c != "more" && c != "less") Bad(node, "comparison must be more or less");
    return ComparativePlan{ResolveGroup(store, node.args[0]),
                           ResolveEntity(store, node.args[1]),
                           c == "more" ? Comparison::kMore : Comparison::kLess,
                           head == "CountOverComparative"};
  }
  Bad(node, "unknown plan kind '" + head + "'");
}

QueryPlan ParsePlan(const KgStore& store, std::string_view text) {
  return ResolvePlan(store, ParseSyntax(text));
}

std::string PrintPlan(const KgStore& store, const QueryPlan& plan) {
  return PrintSyntax(PlanSyntax(store, plan));
}

std::string PrintSetExpr(const KgStore& store, const SetExpr& expr) {
  return PrintSyntax(ExprSyntax(store, expr));
}

SyntaxNode EntityAtom(const KgStore& store, EntityId id) {
  const std::string& label = store.label(id);
  const bool unique = store.vocab().EntitiesWithLabel(label).size() == 1;
  if (!unique) return SyntaxNode::Atom("#" + std::to_string(id.value()));
  // A plain token beginning with '#' would read back as an id reference.
  return SyntaxNode::Atom(label, !IsPlainToken(label) || label[0] == '#');
}

SyntaxNode RelationAtom(const KgStore& store, RelationId id) {
  const std::string& label = store.label(id);
  return SyntaxNode::Atom(label, !IsPlainToken(label));
}

SyntaxNode TypeAtom(const KgStore& store, TypeId id) {
  const std::string& label = store.label(id);
  return SyntaxNode::Atom(label, !IsPlainToken(label));
}

}  // namespace convqa
