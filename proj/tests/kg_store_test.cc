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

#include "convqa/kg_store.h"

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "convqa/synthetic.h"
#include "test_support.h"

namespace convqa {
namespace {

using testing::KgT;
using testing::Labels;
using testing::ScratchDir;
using testing::WriteFile;

TEST(KgStoreLoad, KgTCounts) {
  const KgStore& kg = KgT();
  EXPECT_EQ(kg.tuples().size(), 8u);
  EXPECT_EQ(kg.num_entities(), 10u);
  EXPECT_EQ(kg.num_relations(), 2u);
  EXPECT_EQ(kg.num_types(), 3u);
}

TEST(KgStoreLoad, EmptyTupleFile) {
  auto dir = ScratchDir("empty_tuples");
  WriteFile(dir / "labels.tsv", "a\tE\tA\nr\tR\trel\nt\tT\tthing\n");
  WriteFile(dir / "types.tsv", "a\tt\n");
  WriteFile(dir / "tuples.tsv", "");
  KgStore kg = KgStore::LoadDirectory(dir);
  EXPECT_TRUE(kg.tuples().empty());
  EXPECT_TRUE(kg.objects_of(RelationId(0), EntityId(0)).empty());
  EXPECT_TRUE(kg.subjects_of(RelationId(0), EntityId(0)).empty());
  EXPECT_TRUE(kg.tuples_containing(EntityId(0)).empty());
}

TEST(KgStoreLoad, UnknownEntityNamesTheId) {
  auto dir = ScratchDir("dangling");
  WriteFile(dir / "labels.tsv", "a\tE\tA\nr\tR\trel\nt\tT\tthing\n");
  WriteFile(dir / "types.tsv", "a\tt\n");
  WriteFile(dir / "tuples.tsv", "r\ta\tghost\n");
  try {
    KgStore::LoadDirectory(dir);
    FAIL() << "expected a load error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "load");
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos) << e.what();
  }
}

TEST(KgStoreLoad, MalformedLineReportsLineNumber) {
  auto dir = ScratchDir("malformed");
  WriteFile(dir / "labels.tsv", "a\tE\tA\nb\tE\tB\nr\tR\trel\nt\tT\tthing\n");
  WriteFile(dir / "types.tsv", "a\tt\nb\tt\n");
  WriteFile(dir / "tuples.tsv", "r\ta\tb\nr\ta\n");
  try {
    KgStore::LoadDirectory(dir);
    FAIL() << "expected a load error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("tuples.tsv:2"), std::string::npos) << e.what();
  }
}

TEST(KgStoreLoad, BadKindAndUntypedEndpoint) {
  auto dir = ScratchDir("badkind");
  WriteFile(dir / "labels.tsv", "a\tX\tA\n");
  WriteFile(dir / "types.tsv", "");
  WriteFile(dir / "tuples.tsv", "");
  EXPECT_THROW(KgStore::LoadDirectory(dir), Error);

  WriteFile(dir / "labels.tsv", "a\tE\tA\nb\tE\tB\nr\tR\trel\nt\tT\tthing\n");
  WriteFile(dir / "types.tsv", "a\tt\n");
  WriteFile(dir / "tuples.tsv", "r\ta\tb\n");
  EXPECT_THROW(KgStore::LoadDirectory(dir), Error);
}

TEST(KgStoreLoad, DuplicatesAreDroppedAndCounted) {
  auto dir = ScratchDir("dups");
  WriteFile(dir / "labels.tsv", "a\tE\tA\nb\tE\tB\nr\tR\trel\nt\tT\tthing\n");
  WriteFile(dir / "types.tsv", "a\tt\nb\tt\n");
  WriteFile(dir / "tuples.tsv", "r\ta\tb\nr\ta\tb\nr\ta\tb\n");
  KgStore kg = KgStore::LoadDirectory(dir);
  EXPECT_EQ(kg.tuples().size(), 1u);
  EXPECT_EQ(kg.load_report().duplicate_tuples, 2u);
}

TEST(KgStoreLoad, WriteDirectoryRoundTrips) {
  auto dir = ScratchDir("roundtrip");
  KgT().WriteDirectory(dir);
  KgStore again = KgStore::LoadDirectory(dir);
  EXPECT_EQ(again.tuples(), KgT().tuples());
  EXPECT_EQ(again.type_memberships(), KgT().type_memberships());
  for (uint32_t e = 0; e < KgT().num_entities(); ++e) {
    EXPECT_EQ(again.label(EntityId(e)), KgT().label(EntityId(e)));
  }
}

TEST(KgStoreLookup, KgTExamples) {
  const KgStore& kg = KgT();
  const RelationId flows = kg.relation("flows_through");
  const RelationId capital = kg.relation("capital");
  EXPECT_EQ(kg.objects_of(flows, kg.entity("India")),
            Labels(kg, {"Ganga", "Yamuna", "Brahmaputra"}));
  EXPECT_EQ(kg.subjects_of(flows, kg.entity("Brahmaputra")),
            Labels(kg, {"India", "China"}));
  EXPECT_TRUE(kg.objects_of(capital, kg.entity("Egypt")).empty());
  EXPECT_EQ(kg.entities_of_type(kg.type("country")),
            Labels(kg, {"India", "China", "Egypt"}));
  EXPECT_EQ(kg.tuples_containing(kg.entity("India")).size(), 4u);
}

TEST(KgStoreLookup, UnknownIdsThrow) {
  const KgStore& kg = KgT();
  EXPECT_THROW(kg.objects_of(RelationId(7), EntityId(0)), Error);
  EXPECT_THROW(kg.subjects_of(RelationId(0), EntityId(70)), Error);
  EXPECT_THROW(kg.entities_of_type(TypeId(9)), Error);
  EXPECT_THROW(kg.tuples_containing(EntityId(10)), Error);
  EXPECT_THROW(kg.entity("Atlantis"), Error);
}

TEST(KgStoreFilter, Relations) {
  const KgStore& kg = KgT();
  const RelationId flows = kg.relation("flows_through");
  EXPECT_EQ(kg.FilterRelations({flows}).tuples().size(), 6u);
  EXPECT_EQ(kg.FilterRelations({flows, kg.relation("capital")}).tuples(), kg.tuples());
  EXPECT_TRUE(kg.FilterRelations({}).tuples().empty());
  EXPECT_THROW(kg.FilterRelations({RelationId(5)}), Error);
}

TEST(KgStoreFilter, Types) {
  const KgStore& kg = KgT();
  auto full = kg.FilterTypes(1.0);
  EXPECT_EQ(full.retained.size(), 3u);
  EXPECT_EQ(full.store.tuples(), kg.tuples());

  auto partial = kg.FilterTypes(0.75);
  EXPECT_EQ(partial.retained, (std::set<TypeId>{kg.type("river"), kg.type("country")}));
  EXPECT_EQ(partial.store.tuples().size(), 6u);
  for (const Tuple& t : partial.store.tuples()) {
    EXPECT_EQ(t.relation, kg.relation("flows_through"));
  }

  auto none = kg.FilterTypes(0.0);
  EXPECT_TRUE(none.retained.empty());
  EXPECT_TRUE(none.store.tuples().empty());
  EXPECT_THROW(kg.FilterTypes(1.5), Error);
}

TEST(KgStoreStats, KgT) {
  const StoreStats s = KgT().Stats();
  EXPECT_EQ(s.tuples, 8u);
  EXPECT_EQ(s.entities, 10u);
  EXPECT_EQ(s.relations, 2u);
  EXPECT_EQ(s.types, 3u);
  // India is in 4 tuples and China in 3, so both reach the threshold.
  EXPECT_EQ(KgT().fanout(KgT().entity("India")), 4u);
  EXPECT_EQ(KgT().fanout(KgT().entity("China")), 3u);
  EXPECT_EQ(s.entities_fanout_at_least_3, 2u);
  EXPECT_EQ(s.one_many_tuples, 5u);
  EXPECT_EQ(s.one_one_tuples, 3u);
}

TEST(KgStoreStats, EmptyStore) {
  const StoreStats s = KgStore().Stats();
  EXPECT_EQ(s, StoreStats{});
}

// Recount from the raw tuple list with ordered containers only.
StoreStats Recount(const KgStore& kg) {
  StoreStats s;
  s.tuples = kg.tuples().size();
  s.entities = kg.num_entities();
  s.relations = kg.num_relations();
  s.types = kg.num_types();
  std::map<EntityId, size_t> fan;
  std::map<std::pair<RelationId, EntityId>, size_t> objects;
  for (const Tuple& t : kg.tuples()) {
    ++fan[t.subject];
    if (t.object != t.subject) ++fan[t.object];
    ++objects[{t.relation, t.subject}];
  }
  s.active_entities = fan.size();
  for (const auto& [e, n] : fan) {
    ++s.fanout_histogram[n];
    if (n >= 3) ++s.entities_fanout_at_least_3;
  }
  for (const Tuple& t : kg.tuples()) {
    if (objects[{t.relation, t.subject}] > 1) {
      ++s.one_many_tuples;
    } else {
      ++s.one_one_tuples;
    }
  }
  return s;
}

TEST(KgStoreProperty, StatsMatchRecount) {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticKgOptions o;
    o.num_entities = 40 + seed * 7;
    o.num_tuples = 50 * seed;
    KgStore kg = RandomKg(o, seed);
    EXPECT_EQ(kg.Stats(), Recount(kg)) << "seed " << seed;
  }
}

TEST(KgStoreProperty, StatsMatchRecountAtScale) {
  SyntheticKgOptions o;
  o.num_entities = 20000;
  o.num_relations = 8;
  o.num_types = 6;
  o.num_tuples = 100000;
  KgStore kg = RandomKg(o, 99);
  EXPECT_GT(kg.tuples().size(), 90000u);
  EXPECT_EQ(kg.Stats(), Recount(kg));
}

TEST(KgStoreProperty, IndicesReconstructTupleSet) {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticKgOptions o;
    o.num_tuples = 300;
    KgStore kg = RandomKg(o, seed);
    const std::set<Tuple> truth(kg.tuples().begin(), kg.tuples().end());

    std::set<Tuple> from_subj, from_obj, from_entity;
    for (uint32_t r = 0; r < kg.num_relations(); ++r) {
      for (uint32_t e = 0; e < kg.num_entities(); ++e) {
        for (EntityId o2 : kg.objects_of(RelationId(r), EntityId(e))) {
          from_subj.insert({RelationId(r), EntityId(e), o2});
        }
        for (EntityId s2 : kg.subjects_of(RelationId(r), EntityId(e))) {
          from_obj.insert({RelationId(r), s2, EntityId(e)});
        }
      }
    }
    for (uint32_t e = 0; e < kg.num_entities(); ++e) {
      for (const Tuple& t : kg.tuples_containing(EntityId(e))) {
        EXPECT_TRUE(t.subject == EntityId(e) || t.object == EntityId(e));
        from_entity.insert(t);
      }
    }
    EXPECT_EQ(from_subj, truth) << "seed " << seed;
    EXPECT_EQ(from_obj, truth) << "seed " << seed;
    EXPECT_EQ(from_entity, truth) << "seed " << seed;

    for (const Tuple& t : kg.tuples()) {
      EXPECT_TRUE(kg.subjects_of(t.relation, t.object).contains(t.subject));
      EXPECT_TRUE(kg.objects_of(t.relation, t.subject).contains(t.object));
    }
  }
}

TEST(KgStoreProperty, FilterRelationsComposes) {
  Rng rng(5);
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticKgOptions o;
    o.num_relations = 5;
    KgStore kg = RandomKg(o, seed);
    std::set<RelationId> a, b, both;
    for (uint32_t r = 0; r < 5; ++r) {
      if (rng.Bernoulli(0.6)) a.insert(RelationId(r));
      if (rng.Bernoulli(0.6)) b.insert(RelationId(r));
    }
    for (RelationId r : a) {
      if (b.count(r)) both.insert(r);
    }
    EXPECT_EQ(kg.FilterRelations(a).FilterRelations(b).tuples(),
              kg.FilterRelations(both).tuples());
  }
}

TEST(KgStoreProperty, TypeFilterCoverageIsMinimalPrefix) {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticKgOptions o;
    o.num_types = 4;
    KgStore kg = RandomKg(o, seed);
    for (double f : {0.25, 0.5, 0.9}) {
      auto r = kg.FilterTypes(f);
      const double kept = static_cast<double>(r.store.tuples().size()) /
                          static_cast<double>(kg.tuples().size());
      EXPECT_GE(kept + 1e-12, f);
      for (const Tuple& t : r.store.tuples()) {
        bool s_ok = false, o_ok = false;
        for (TypeId ty : r.retained) {
          s_ok = s_ok || kg.has_type(t.subject, ty);
          o_ok = o_ok || kg.has_type(t.object, ty);
        }
        EXPECT_TRUE(s_ok && o_ok);
      }
    }
  }
}

TEST(KgStoreLabels, AmbiguousLabelLookupThrows) {
  auto vocab = std::make_shared<Vocabulary>();
  vocab->AddEntity("a", "Paris");
  vocab->AddEntity("b", "Paris");
  const TypeId t = vocab->AddType("t", "city");
  KgStore kg = KgStore::Build(vocab, {}, {{EntityId(0), t}, {EntityId(1), t}});
  EXPECT_EQ(kg.vocab().EntitiesWithLabel("Paris").size(), 2u);
  EXPECT_THROW(kg.entity("Paris"), Error);
}

}  // namespace
}  // namespace convqa
