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

#include "convqa/synthetic.h"

#include <array>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "convqa/rng.h"

namespace convqa {
namespace {

constexpr std::array<const char*, 10> kTypeNames = {
    "river", "country", "city", "lake", "mountain",
    "person", "film", "language", "company", "island"};
constexpr std::array<const char*, 10> kTypePlurals = {
    "rivers", "countries", "cities", "lakes", "mountains",
    "people", "films", "languages", "companies", "islands"};
constexpr std::array<const char*, 10> kRelationNames = {
    "flows_through", "located_in", "borders", "born_in", "directed_by",
    "spoken_in", "twinned_with", "part_of", "owned_by", "named_after"};

constexpr std::array<const char*, 16> kOnsets = {
    "b", "k", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st"};
constexpr std::array<const char*, 6> kVowels = {"a", "e", "i", "o", "u", "ai"};

std::string NameOrIndexed(const char* base, size_t i, size_t table_size) {
  std::string name = base;
  if (i >= table_size) name += "_" + std::to_string(i / table_size);
  return name;
}

}  // namespace

std::string PseudoWord(uint64_t index) {
  std::string word;
  uint64_t x = index;
  int syllables = 0;
  do {
    const uint64_t s = x % (kOnsets.size() * kVowels.size());
    x /= kOnsets.size() * kVowels.size();
    word += kOnsets[s / kVowels.size()];
    word += kVowels[s % kVowels.size()];
    ++syllables;
  } while (x > 0 || syllables < 2);
  word[0] = static_cast<char>(word[0] - 'a' + 'A');
  return word;
}

KgStore RandomKg(const SyntheticKgOptions& options, uint64_t seed) {
  if (options.num_types == 0 || options.num_relations == 0) {
    throw Error("range", "synthetic KG needs at least one type and relation");
  }
  Rng rng(seed);
  auto vocab = std::make_shared<Vocabulary>();

  std::vector<TypeId> types;
  for (size_t t = 0; t < options.num_types; ++t) {
    const size_t k = t % kTypeNames.size();
    types.push_back(vocab->AddType(
        "t" + std::to_string(t), NameOrIndexed(kTypeNames[k], t, kTypeNames.size()),
        NameOrIndexed(kTypePlurals[k], t, kTypePlurals.size())));
  }
  std::vector<RelationId> relations;
  for (size_t r = 0; r < options.num_relations; ++r) {
    relations.push_back(vocab->AddRelation(
        "r" + std::to_string(r),
        NameOrIndexed(kRelationNames[r % kRelationNames.size()], r,
                      kRelationNames.size())));
  }

  // Word indices are drawn from a seeded offset so distinct seeds give
  // distinct label sets.
  const uint64_t word_base = rng.Below(1000);
  std::vector<std::string> labels;
  std::vector<std::pair<EntityId, TypeId>> memberships;
  std::vector<std::vector<EntityId>> members(options.num_types);
  for (size_t e = 0; e < options.num_entities; ++e) {
    std::string label;
    if (!labels.empty() && rng.Bernoulli(options.shared_label_rate)) {
      label = labels[rng.Below(labels.size())];
    } else {
      label = PseudoWord(word_base + e);
    }
    labels.push_back(label);
    const EntityId id = vocab->AddEntity("e" + std::to_string(e), label);
    // Round-robin primary type keeps every type populated.
    const size_t primary = e % options.num_types;
    memberships.emplace_back(id, types[primary]);
    members[primary].push_back(id);
    if (options.num_types > 1 && rng.Bernoulli(options.extra_type_rate)) {
      size_t extra = rng.Below(options.num_types - 1);
      if (extra >= primary) ++extra;
      memberships.emplace_back(id, types[extra]);
      members[extra].push_back(id);
    }
  }

  std::vector<size_t> domain(options.num_relations), range(options.num_relations);
  for (size_t r = 0; r < options.num_relations; ++r) {
    domain[r] = rng.Below(options.num_types);
    range[r] = rng.Below(options.num_types);
  }

  auto draw = [&](const std::vector<EntityId>& pool) {
    if (!options.skewed) return pool[rng.Below(pool.size())];
    const double u = rng.Uniform();
    return pool[static_cast<size_t>(u * u * static_cast<double>(pool.size()))];
  };

  std::set<Tuple> tuples;
  const size_t max_attempts = options.num_tuples * 20 + 100;
  for (size_t attempt = 0;
       attempt < max_attempts && tuples.size() < options.num_tuples; ++attempt) {
    const size_t r = rng.Below(options.num_relations);
    const auto& subjects = members[domain[r]];
    const auto& objects = members[range[r]];
    if (subjects.empty() || objects.empty()) continue;
    const EntityId s = draw(subjects);
    const EntityId o = draw(objects);
    if (s == o) continue;
    tuples.insert({relations[r], s, o});
  }
  return KgStore::Build(vocab, std::vector<Tuple>(tuples.begin(), tuples.end()),
                        std::move(memberships));
}

}  // namespace convqa
