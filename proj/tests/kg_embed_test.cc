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

#include "convqa/kg_embed.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "convqa/rng.h"
#include "convqa/synthetic.h"
#include "support/test_support.h"

namespace convqa {
namespace {

using testing::KgT;

std::vector<Tuple> AllTuples(const KgStore& kg) {
  return std::vector<Tuple>(kg.tuples().begin(), kg.tuples().end());
}

// Central differences of MarginLoss over every table coordinate.
TableGradient NumericGradient(const EmbeddingTable& table, const Tuple& pos, const Tuple& neg,
                              double margin, double h) {
  TableGradient g{EmbeddingMatrix::Zero(table.entities.rows(), table.entities.cols()),
                  EmbeddingMatrix::Zero(table.relations.rows(), table.relations.cols())};
  EmbeddingTable t = table;
  auto probe = [&](EmbeddingMatrix& m, EmbeddingMatrix& out) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double keep = m(i, j);
        m(i, j) = keep + h;
        const double up = MarginLoss(t, pos, neg, margin);
        m(i, j) = keep - h;
        const double down = MarginLoss(t, pos, neg, margin);
        m(i, j) = keep;
        out(i, j) = (up - down) / (2 * h);
      }
    }
  };
  probe(t.entities, g.entities);
  probe(t.relations, g.relations);
  return g;
}

double Flatten(const TableGradient& g, std::vector<double>& out) {
  out.assign(g.entities.data(), g.entities.data() + g.entities.size());
  out.insert(out.end(), g.relations.data(), g.relations.data() + g.relations.size());
  return std::sqrt(std::inner_product(out.begin(), out.end(), out.begin(), 0.0));
}

TEST(Score, IdentityIsZeroAndNonNegative) {
  EmbeddingTable t = InitTable(3, 1, 4, 1);
  t.relations.row(0) = t.entities.row(2) - t.entities.row(0);
  EXPECT_NEAR(Score(t, {RelationId(0), EntityId(0), EntityId(2)}), 0.0, 1e-15);
  for (uint32_t s = 0; s < 3; ++s) {
    for (uint32_t o = 0; o < 3; ++o) EXPECT_GE(Score(t, {RelationId(0), EntityId(s), EntityId(o)}), 0);
  }
  EXPECT_THROW(Score(t, {RelationId(1), EntityId(0), EntityId(1)}), Error);
  EXPECT_THROW(Score(t, {RelationId(0), EntityId(3), EntityId(1)}), Error);
}

TEST(Init, UnitRowsAndDeterminism) {
  const EmbeddingTable a = InitTable(10, 3, 8, 4);
  for (Eigen::Index i = 0; i < a.entities.rows(); ++i) EXPECT_NEAR(a.entities.row(i).norm(), 1, 1e-12);
  EXPECT_EQ(a.entities, InitTable(10, 3, 8, 4).entities);
  EXPECT_NE(a.entities, InitTable(10, 3, 8, 5).entities);
  EXPECT_THROW(InitTable(10, 3, 0, 4), Error);
}

TEST(Gradient, MatchesCentralDifferences) {
  Rng rng(77);
  int checked = 0;
  for (uint64_t point = 0; checked < 5; ++point) {
    ASSERT_LT(point, 100u);
    EmbeddingTable t = InitTable(6, 2, 5, point);
    // Off the unit sphere, so the check does not rely on the constraint.
    for (Eigen::Index i = 0; i < t.entities.size(); ++i) t.entities.data()[i] *= rng.Uniform(0.5, 2);
    const Tuple pos{RelationId(static_cast<uint32_t>(rng.Below(2))), EntityId(0), EntityId(1)};
    const Tuple neg{pos.relation, EntityId(0), EntityId(static_cast<uint32_t>(2 + rng.Below(4)))};
    const double margin = 4.0;
    if (MarginLoss(t, pos, neg, margin) <= 0.1) continue;
    std::vector<double> a, n;
    const double na = Flatten(MarginGradient(t, pos, neg, margin), a);
    const double nn = Flatten(NumericGradient(t, pos, neg, margin, 1e-6), n);
    double diff = 0;
    for (size_t i = 0; i < a.size(); ++i) diff += (a[i] - n[i]) * (a[i] - n[i]);
    EXPECT_LE(std::sqrt(diff) / std::max(na, nn), 1e-4) << "point " << point;
    ++checked;
  }
}

TEST(Gradient, ZeroWhenMarginSatisfied) {
  EmbeddingTable t = InitTable(3, 1, 4, 2);
  t.relations.row(0) = t.entities.row(1) - t.entities.row(0);
  const Tuple pos{RelationId(0), EntityId(0), EntityId(1)};
  const Tuple neg{RelationId(0), EntityId(0), EntityId(2)};
  const double gap = Score(t, neg) - Score(t, pos);
  ASSERT_GT(gap, 0);
  EXPECT_EQ(MarginLoss(t, pos, neg, gap / 2), 0);
  const TableGradient g = MarginGradient(t, pos, neg, gap / 2);
  EXPECT_EQ(g.entities.norm() + g.relations.norm(), 0);
}

TEST(Train, ZeroEpochsIsInitialization) {
  TrainConfig c;
  c.epochs = 0;
  c.seed = 9;
  const TrainResult r = Train(KgT(), c);
  const EmbeddingTable init = InitTable(KgT().num_entities(), KgT().num_relations(), c.dim, 9);
  EXPECT_EQ(r.table.entities, init.entities);
  EXPECT_EQ(r.table.relations, init.relations);
  EXPECT_TRUE(r.epoch_loss.empty());
}

TEST(Train, DeterministicPerSeed) {
  TrainConfig c;
  c.epochs = 30;
  const TrainResult a = Train(KgT(), c), b = Train(KgT(), c);
  EXPECT_EQ(a.table.entities, b.table.entities);
  EXPECT_EQ(a.table.relations, b.table.relations);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  c.seed = 1;
  EXPECT_NE(Train(KgT(), c).table.entities, a.table.entities);
}

TEST(Train, RejectsBadConfig) {
  TrainConfig c;
  c.dim = 0;
  EXPECT_THROW(Train(KgT(), c), Error);
  c.dim = 4;
  c.margin = 0;
  EXPECT_THROW(Train(KgT(), c), Error);
  EXPECT_THROW(Train(KgStore(), TrainConfig{}), Error);
}

TEST(Train, SeparatesTrueFromCorrupted) {
  const TrainResult r = Train(KgT(), TrainConfig{});
  for (Eigen::Index i = 0; i < r.table.entities.rows(); ++i) {
    EXPECT_NEAR(r.table.entities.row(i).norm(), 1.0, 1e-9);
  }
  EXPECT_TRUE(r.table.entities.allFinite());
  EXPECT_TRUE(r.table.relations.allFinite());
  double truth = 0, corrupted = 0;
  size_t nc = 0;
  for (const Tuple& t : KgT().tuples()) {
    truth += Score(r.table, t);
    for (uint32_t e = 0; e < KgT().num_entities(); ++e) {
      Tuple c = t;
      c.object = EntityId(e);
      if (KgT().contains(c)) continue;
      corrupted += Score(r.table, c);
      ++nc;
    }
  }
  EXPECT_LT(truth / static_cast<double>(KgT().tuples().size()), corrupted / static_cast<double>(nc));
}

TEST(Train, LossWindowsDoNotRise) {
  // A 10-epoch window's mean may not exceed the largest epoch loss of the
  // window before it.
  for (uint64_t seed = 0; seed < 10; ++seed) {
    TrainConfig c;
    c.seed = seed;
    const std::vector<double> loss = Train(KgT(), c).epoch_loss;
    ASSERT_EQ(loss.size(), c.epochs);
    for (size_t k = 10; k + 10 <= loss.size(); k += 10) {
      const double prev_max = *std::max_element(loss.begin() + k - 10, loss.begin() + k);
      const double mean = std::accumulate(loss.begin() + k, loss.begin() + k + 10, 0.0) / 10;
      EXPECT_LE(mean, prev_max) << "seed " << seed << " epoch " << k;
    }
    EXPECT_LT(loss.back(), loss.front());
  }
}

TEST(LinkPrediction, PerfectTable) {
  // Relation k maps entity 2k to 2k+1 and nothing else scores zero.
  auto vocab = std::make_shared<Vocabulary>();
  const TypeId t = vocab->AddType("T", "thing");
  std::vector<Tuple> tuples;
  std::vector<std::pair<EntityId, TypeId>> types;
  for (uint32_t k = 0; k < 6; ++k) {
    vocab->AddEntity("a" + std::to_string(k), "a" + std::to_string(k));
    vocab->AddEntity("b" + std::to_string(k), "b" + std::to_string(k));
    vocab->AddRelation("r" + std::to_string(k), "r" + std::to_string(k));
    tuples.push_back({RelationId(k), EntityId(2 * k), EntityId(2 * k + 1)});
    types.push_back({EntityId(2 * k), t});
    types.push_back({EntityId(2 * k + 1), t});
  }
  const KgStore kg = KgStore::Build(vocab, tuples, types);
  EmbeddingTable table;
  table.entities = EmbeddingMatrix::Identity(12, 12);
  table.relations = EmbeddingMatrix::Zero(6, 12);
  for (uint32_t k = 0; k < 6; ++k) {
    table.relations.row(k) = table.entities.row(2 * k + 1) - table.entities.row(2 * k);
  }
  const LinkPredictionResult r = EvaluateLinkPrediction(table, tuples, kg);
  for (const RankStats* s : {&r.subject_raw, &r.object_raw, &r.subject_filtered, &r.object_filtered}) {
    EXPECT_EQ(s->count, 6u);
    EXPECT_DOUBLE_EQ(s->mean_rank, 1.0);
    EXPECT_DOUBLE_EQ(s->hits_at_10, 1.0);
  }
}

TEST(LinkPrediction, TiesCountHalf) {
  // All-zero table: every candidate ties with the truth.
  EmbeddingTable table;
  table.entities = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(KgT().num_entities()), 3);
  table.relations = EmbeddingMatrix::Zero(static_cast<Eigen::Index>(KgT().num_relations()), 3);
  const LinkPredictionResult r = EvaluateLinkPrediction(table, AllTuples(KgT()), KgT());
  EXPECT_DOUBLE_EQ(r.object_raw.mean_rank, RandomRankBaseline(10).mean_rank);
  EXPECT_DOUBLE_EQ(r.subject_raw.mean_rank, 5.5);
}

TEST(LinkPrediction, RandomTableMatchesUniformRank) {
  SyntheticKgOptions o;
  o.num_entities = 50;
  o.num_tuples = 400;
  const KgStore kg = RandomKg(o, 3);
  double sum = 0;
  size_t count = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const EmbeddingTable table = InitTable(kg.num_entities(), kg.num_relations(), 16, seed);
    const LinkPredictionResult r = EvaluateLinkPrediction(table, AllTuples(kg), kg);
    sum += r.subject_raw.mean_rank * static_cast<double>(r.subject_raw.count);
    sum += r.object_raw.mean_rank * static_cast<double>(r.object_raw.count);
    count += r.subject_raw.count + r.object_raw.count;
  }
  const double baseline = RandomRankBaseline(50).mean_rank;
  EXPECT_DOUBLE_EQ(baseline, 25.5);
  // Per-rank sd is about 14.4; 4000 rankings that share tables are not
  // independent, so the band is generous.
  EXPECT_NEAR(sum / static_cast<double>(count), baseline, 2.0);
}

TEST(LinkPrediction, TrainedKgTBeatsRandom) {
  const TrainResult r = Train(KgT(), TrainConfig{});
  const LinkPredictionResult e = EvaluateLinkPrediction(r.table, AllTuples(KgT()), KgT());
  const double random = RandomRankBaseline(KgT().num_entities()).mean_rank;
  EXPECT_LT(e.object_raw.mean_rank, random);
  EXPECT_LT(e.subject_raw.mean_rank, random);
  EXPECT_LE(e.object_filtered.mean_rank, e.object_raw.mean_rank);
}

TEST(LinkPrediction, TrainedSyntheticBeatsRandomHits) {
  SyntheticKgOptions o;
  o.num_entities = 50;
  o.num_tuples = 150;
  const KgStore kg = RandomKg(o, 8);
  TrainConfig c;
  c.epochs = 300;
  const TrainResult r = Train(kg, c);
  const LinkPredictionResult e = EvaluateLinkPrediction(r.table, AllTuples(kg), kg);
  const RankStats random = RandomRankBaseline(50);
  EXPECT_GT(e.object_raw.hits_at_10, random.hits_at_10);
  EXPECT_GT(e.subject_raw.hits_at_10, random.hits_at_10);
}

TEST(Score, InvariantUnderEntityRenaming) {
  const EmbeddingTable t = InitTable(8, 2, 6, 3);
  std::vector<uint32_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(5);
  rng.Shuffle(perm);
  EmbeddingTable renamed = t;
  for (uint32_t i = 0; i < 8; ++i) renamed.entities.row(perm[i]) = t.entities.row(i);
  for (uint32_t s = 0; s < 8; ++s) {
    for (uint32_t o = 0; o < 8; ++o) {
      for (uint32_t r = 0; r < 2; ++r) {
        EXPECT_DOUBLE_EQ(Score(t, {RelationId(r), EntityId(s), EntityId(o)}),
                         Score(renamed, {RelationId(r), EntityId(perm[s]), EntityId(perm[o])}));
      }
    }
  }
}

TEST(EmbeddingFile, RoundTripAndErrors) {
  const auto dir = testing::ScratchDir("embed");
  TrainConfig c;
  c.epochs = 5;
  const EmbeddingTable t = Train(KgT(), c).table;
  WriteEmbeddings(dir / "kg_t.emb", t, KgT());
  const EmbeddingTable back = ReadEmbeddings(dir / "kg_t.emb", KgT());
  EXPECT_EQ(back.dim(), 32u);
  EXPECT_LE((back.entities - t.entities).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_LE((back.relations - t.relations).cwiseAbs().maxCoeff(), 1e-7);
  const std::string bytes = testing::ReadFile(dir / "kg_t.emb");
  EXPECT_EQ(bytes.size(), 8 + 12 + 4 * 32 * (10 + 2));
  EXPECT_EQ(bytes.substr(0, 8), "CQEMBED1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 32);  // little endian D

  testing::WriteFile(dir / "cut.emb", bytes.substr(0, bytes.size() - 3));
  std::filesystem::copy_file(dir / "kg_t.emb.ids", dir / "cut.emb.ids");
  EXPECT_THROW(ReadEmbeddings(dir / "cut.emb", KgT()), Error);

  SyntheticKgOptions o;
  o.num_entities = 10;
  o.num_relations = 2;
  EXPECT_THROW(ReadEmbeddings(dir / "kg_t.emb", RandomKg(o, 1)), Error);
  EXPECT_THROW(ReadEmbeddings(dir / "missing.emb", KgT()), Error);
}

}  // namespace
}  // namespace convqa
