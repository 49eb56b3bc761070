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

#include <benchmark/benchmark.h>

#include <filesystem>

#include "convqa/dataset.h"
#include "convqa/entity_linker.h"
#include "convqa/eval.h"
#include "convqa/kg_embed.h"
#include "convqa/memnet.h"
#include "convqa/plan_text.h"
#include "convqa/synthetic.h"
#include "convqa/templates.h"

namespace convqa {
namespace {

const KgStore& Kg(size_t entities, size_t tuples) {
  static std::map<std::pair<size_t, size_t>, KgStore> cache;
  auto it = cache.find({entities, tuples});
  if (it == cache.end()) {
    SyntheticKgOptions o;
    o.num_entities = entities;
    o.num_tuples = tuples;
    it = cache.emplace(std::make_pair(entities, tuples), RandomKg(o, 21)).first;
  }
  return it->second;
}

std::vector<QueryPlan> SamplePlans(const KgStore& kg) {
  std::vector<QueryPlan> plans;
  for (size_t i = 0; i < kg.tuples().size(); i += kg.tuples().size() / 16 + 1) {
    const Tuple& t = kg.tuples()[i];
    const std::string rel = PrintSyntax(RelationAtom(kg, t.relation));
    const std::string subj = PrintSyntax(EntityAtom(kg, t.subject));
    const TypeId ot = *kg.types_of(t.object).begin();
    const TypeId st = *kg.types_of(t.subject).begin();
    const std::string oty = PrintSyntax(TypeAtom(kg, ot));
    const std::string sty = PrintSyntax(TypeAtom(kg, st));
    plans.push_back(ParsePlan(kg, "Count(Lookup(obj, " + rel + ", " + subj + ", " + oty + "))"));
    plans.push_back(ParsePlan(kg, "ArgOpt(Group(" + sty + ", (" + rel + ", obj, " + oty + ")), max)"));
    plans.push_back(ParsePlan(
        kg, "ThresholdFilter(Group(" + sty + ", (" + rel + ", obj, " + oty + ")), atleast, 2)"));
  }
  return plans;
}

void BM_Execute(benchmark::State& state) {
  const KgStore& kg = Kg(static_cast<size_t>(state.range(0)), static_cast<size_t>(state.range(1)));
  const auto plans = SamplePlans(kg);
  for (auto _ : state) {
    for (const QueryPlan& p : plans) benchmark::DoNotOptimize(Execute(kg, p));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(plans.size()));
}
BENCHMARK(BM_Execute)->Args({150, 800})->Args({2000, 20000});

void BM_BruteForceExecute(benchmark::State& state) {
  const KgStore& kg = Kg(150, 800);
  const auto plans = SamplePlans(kg);
  for (auto _ : state) {
    for (const QueryPlan& p : plans) benchmark::DoNotOptimize(BruteForceExecute(kg, p));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(plans.size()));
}
BENCHMARK(BM_BruteForceExecute);

void BM_GenerateDialogs(benchmark::State& state) {
  const KgStore& kg = Kg(150, 800);
  const DialogGenerator gen(
      kg, LoadTemplates(std::filesystem::path(CONVQA_FIXTURE_DIR) / "toy" / "templates.jsonl"));
  const auto threads = static_cast<size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(GenerateCorpus(kg, gen, 50, 1, threads));
  state.SetItemsProcessed(state.iterations() * 50);
}
BENCHMARK(BM_GenerateDialogs)->Arg(1)->Arg(4)->UseRealTime();

void BM_LinkAndRetrieve(benchmark::State& state) {
  const KgStore& kg = Kg(2000, 20000);
  const Gazetteer gaz = Gazetteer::Build(kg);
  std::string utterance = "which of these";
  for (uint32_t i = 0; i < 5; ++i) utterance += " " + kg.label(EntityId(i * 37));
  utterance += " ?";
  for (auto _ : state) {
    const auto mentions = Link(gaz, utterance);
    benchmark::DoNotOptimize(CandidateTuples(kg, MatchedEntities(mentions)));
  }
}
BENCHMARK(BM_LinkAndRetrieve);

void BM_MultiHop(benchmark::State& state) {
  const auto n = static_cast<size_t>(state.range(0));
  const size_t D = 32, d = 32;
  std::vector<Tuple> tuples;
  for (size_t i = 0; i < n; ++i) {
    tuples.push_back({RelationId(uint32_t(i % 4)), EntityId(uint32_t(i % 100)),
                      EntityId(uint32_t((i * 7) % 100))});
  }
  const EmbeddingTable table = InitTable(100, 4, D, 1);
  const MemorySlab slab = BuildMemory(tuples, table);
  HopParams p;
  p.A = Eigen::MatrixXd::Random(d, 2 * D);
  p.R.assign(kDefaultHops, Eigen::MatrixXd::Random(d, d));
  p.B = Eigen::MatrixXd::Random(d, D);
  p.q1 = Eigen::VectorXd::Random(d);
  for (auto _ : state) {
    const MultiHopResult r = MultiHop(slab, p);
    benchmark::DoNotOptimize(EntityDistribution(r.q_final, slab, p.B));
  }
  state.SetItemsProcessed(state.iterations() * int64_t(n));
}
BENCHMARK(BM_MultiHop)->Arg(100)->Arg(kDefaultMemoryCap);

void BM_TrainEpoch(benchmark::State& state) {
  const KgStore& kg = Kg(150, 800);
  TrainConfig c;
  c.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(Train(kg, c));
  state.SetItemsProcessed(state.iterations() * int64_t(kg.tuples().size()));
}
BENCHMARK(BM_TrainEpoch);

void BM_Bleu(benchmark::State& state) {
  const std::string ref = "did you mean the river that flows through the capital of that country ?";
  const std::string cand = "did you mean the river flowing through the capital of this country ?";
  for (auto _ : state) benchmark::DoNotOptimize(Bleu(ref, cand, {kBleuEpsilon}));
}
BENCHMARK(BM_Bleu);

}  // namespace
}  // namespace convqa

BENCHMARK_MAIN();
