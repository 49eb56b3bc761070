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

#include <gtest/gtest.h>

#include "convqa/synthetic.h"
#include "test_support.h"

namespace convqa {
namespace {

using testing::KgT;

TEST(PlanText, ParsesCanonicalForms) {
  const KgStore& kg = KgT();
  QueryPlan p = ParsePlan(kg, "Count(Lookup(obj, flows_through, India, river))");
  EXPECT_EQ(p.kind(), PlanKind::kCount);
  EXPECT_EQ(testing::SingleCount(Execute(kg, p)), 3u);

  QueryPlan q = ParsePlan(
      kg, "CountOverComparative(Group(country, (flows_through, obj, river)), Egypt, more)");
  EXPECT_EQ(testing::SingleCount(Execute(kg, q)), 2u);

  QueryPlan v = ParsePlan(kg, "Verify((flows_through, India, Ganga), (flows_through, India, Mekong))");
  EXPECT_EQ(std::get<BooleanAnswer>(Execute(kg, v)).values, (std::vector<bool>{true, false}));
}

TEST(PlanText, QuotedAndBareMultiwordLabels) {
  const KgStore& kg = KgT();
  QueryPlan a = ParsePlan(kg, "Retrieve(Lookup(subj, capital, \"New Delhi\", country))");
  QueryPlan b = ParsePlan(kg, "Retrieve(Lookup(subj, capital, New Delhi, country))");
  EXPECT_EQ(a, b);
  EXPECT_EQ(testing::Entities(Execute(kg, a)), testing::Labels(kg, {"India"}));
  EXPECT_EQ(PrintPlan(kg, a), "Retrieve(Lookup(subj, capital, \"New Delhi\", country))");
}

TEST(PlanText, Errors) {
  const KgStore& kg = KgT();
  EXPECT_THROW(ParsePlan(kg, "Count(Lookup(obj, flows_through, India, river)"), Error);
  EXPECT_THROW(ParsePlan(kg, "Count(Lookup(obj, flows_through, Atlantis, river))"), Error);
  EXPECT_THROW(ParsePlan(kg, "Frobnicate(Lookup(obj, flows_through, India, river))"), Error);
  EXPECT_THROW(ParsePlan(kg, "Count(Lookup(sideways, flows_through, India, river))"), Error);
  EXPECT_THROW(ParsePlan(kg, "ThresholdFilter(Group(river, (flows_through, subj, country)), atleast, -1)"),
               Error);
  EXPECT_THROW(ParsePlan(kg, "Count(Lookup(obj, flows_through, India, river)) extra"), Error);
}

TEST(PlanText, SyntaxSubstitution) {
  SyntaxNode n = ParseSyntax("Retrieve(Lookup(obj, ⟨relation⟩, ⟨entity:1⟩, ⟨object_type⟩))");
  std::map<std::string, SyntaxNode> b{
      {"⟨relation⟩", SyntaxNode::Atom("flows_through")},
      {"⟨entity:1⟩", SyntaxNode::Atom("India")},
      {"⟨object_type⟩", SyntaxNode::Atom("river")}};
  QueryPlan p = ResolvePlan(KgT(), Substitute(n, b));
  EXPECT_EQ(testing::Entities(Execute(KgT(), p)).size(), 3u);
  size_t atoms = 0;
  ForEachAtom(n, [&](const SyntaxNode&) { ++atoms; });
  EXPECT_EQ(atoms, 4u);
}

TEST(PlanText, AmbiguousLabelsPrintAsIds) {
  SyntheticKgOptions o;
  o.shared_label_rate = 0.3;
  KgStore kg = RandomKg(o, 4);
  Rng rng(4);
  size_t with_ids = 0;
  for (int i = 0; i < 300; ++i) {
    QueryPlan p = testing::RandomPlan(kg, rng);
    const std::string text = PrintPlan(kg, p);
    if (text.find('#') != std::string::npos) ++with_ids;
    ASSERT_EQ(ParsePlan(kg, text), p) << text;
  }
  EXPECT_GT(with_ids, 0u);
}

TEST(PlanText, RoundTripEnumeratedSpace) {
  testing::PlanSpace space;
  space.max_binary = 500;
  space.max_groups = 30;
  for (const QueryPlan& p : testing::EnumeratePlans(KgT(), space)) {
    const std::string text = PrintPlan(KgT(), p);
    ASSERT_EQ(ParsePlan(KgT(), text), p) << text;
    ASSERT_EQ(PrintPlan(KgT(), ParsePlan(KgT(), text)), text);
  }
}

TEST(PlanText, SyntaxRoundTrip) {
  for (const char* text : {"A(b, \"c d\", (e, f), G())", "\"x\\\"y\"", "#12"}) {
    SyntaxNode n = ParseSyntax(text);
    EXPECT_EQ(ParseSyntax(PrintSyntax(n)), n) << text;
  }
}

}  // namespace
}  // namespace convqa
