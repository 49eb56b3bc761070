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

// Immutable, indexed tuple store.
//
// On-disk layout (all UTF-8, tab separated, one record per line, blank lines
// and lines starting with '#' ignored):
//
//   labels.tsv   id <TAB> kind <TAB> label [<TAB> plural]   kind is E, R or T
//   tuples.tsv   relation_id <TAB> subject_id <TAB> object_id
//   types.tsv    entity_id <TAB> type_id
//
// File ids are arbitrary tokens, scoped per kind. Dense ids are assigned in
// the order records appear in labels.tsv. The optional plural column is only
// meaningful for types and is used when rendering questions.

#ifndef CONVQA_KG_STORE_H_
#define CONVQA_KG_STORE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convqa/common.h"

namespace convqa {

struct StoreStats {
  size_t tuples = 0;
  size_t entities = 0;
  // Entities appearing in at least one tuple.
  size_t active_entities = 0;
  size_t relations = 0;
  size_t types = 0;
  // fanout (tuples containing the entity) -> number of active entities.
  std::map<size_t, size_t> fanout_histogram;
  size_t entities_fanout_at_least_3 = 0;
  // A tuple is one-many when its (relation, subject) pair has more than one
  // object, one-one otherwise.
  size_t one_one_tuples = 0;
  size_t one_many_tuples = 0;

  friend bool operator==(const StoreStats&, const StoreStats&) = default;
};

struct LoadReport {
  size_t duplicate_tuples = 0;
};

// Labels and file ids for every entity, relation and type. Shared between a
// store and the filtered stores derived from it so ids stay stable.
class Vocabulary {
 public:
  struct Entry {
    std::string external_id;
    std::string label;
  };

  size_t num_entities() const { return entities_.size(); }
  size_t num_relations() const { return relations_.size(); }
  size_t num_types() const { return types_.size(); }

  const Entry& entity(EntityId id) const;
  const Entry& relation(RelationId id) const;
  const Entry& type(TypeId id) const;
  const std::string& type_plural(TypeId id) const;

  std::span<const EntityId> EntitiesWithLabel(std::string_view label) const;
  std::optional<RelationId> FindRelation(std::string_view label) const;
  std::optional<TypeId> FindType(std::string_view label) const;
  std::optional<EntityId> EntityByExternalId(std::string_view id) const;
  std::optional<RelationId> RelationByExternalId(std::string_view id) const;
  std::optional<TypeId> TypeByExternalId(std::string_view id) const;

  EntityId AddEntity(std::string external_id, std::string label);
  RelationId AddRelation(std::string external_id, std::string label);
  TypeId AddType(std::string external_id, std::string label,
                 std::string plural = "");

 private:
  std::vector<Entry> entities_;
  std::vector<Entry> relations_;
  std::vector<Entry> types_;
  std::vector<std::string> type_plurals_;
  std::unordered_map<std::string, std::vector<EntityId>> entity_by_label_;
  std::unordered_map<std::string, RelationId> relation_by_label_;
  std::unordered_map<std::string, TypeId> type_by_label_;
  std::unordered_map<std::string, EntityId> entity_by_ext_;
  std::unordered_map<std::string, RelationId> relation_by_ext_;
  std::unordered_map<std::string, TypeId> type_by_ext_;
};

// English plural used when a type has no explicit plural label.
std::string DefaultPlural(std::string_view singular);

class KgStore {
 public:
  // Empty store with an empty vocabulary.
  KgStore();

  // Builds a store over `vocab` from in-memory records. Duplicate tuples and
  // memberships are dropped; out-of-range ids and untyped tuple endpoints are
  // rejected exactly as Load() rejects them.
  static KgStore Build(std::shared_ptr<const Vocabulary> vocab,
                       std::vector<Tuple> tuples,
                       std::vector<std::pair<EntityId, TypeId>> memberships);

  static KgStore Load(const std::filesystem::path& tuple_file,
                      const std::filesystem::path& label_file,
                      const std::filesystem::path& type_file);
  // Reads tuples.tsv, labels.tsv and types.tsv from `dir`.
  static KgStore LoadDirectory(const std::filesystem::path& dir);
  void WriteDirectory(const std::filesystem::path& dir) const;

  const Vocabulary& vocab() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> shared_vocab() const { return vocab_; }

  size_t num_entities() const { return vocab_->num_entities(); }
  size_t num_relations() const { return vocab_->num_relations(); }
  size_t num_types() const { return vocab_->num_types(); }

  const std::string& label(EntityId id) const {
    return vocab_->entity(id).label;
  }
  const std::string& label(RelationId id) const {
    return vocab_->relation(id).label;
  }
  const std::string& label(TypeId id) const { return vocab_->type(id).label; }

  // Lookup by label; throws Error("unknown_id") when absent or, for
  // entities, ambiguous.
  EntityId entity(std::string_view label) const;
  RelationId relation(std::string_view label) const;
  TypeId type(std::string_view label) const;

  // Sorted by (relation, subject, object), duplicate free.
  const std::vector<Tuple>& tuples() const { return tuples_; }
  // Sorted (entity, type) pairs.
  const std::vector<std::pair<EntityId, TypeId>>& type_memberships() const {
    return memberships_;
  }
  bool contains(const Tuple& t) const;

  // Index lookups. Unknown ids throw Error("unknown_id"); absent facts yield
  // the empty set.
  const EntitySet& objects_of(RelationId rel, EntityId subject) const;
  const EntitySet& subjects_of(RelationId rel, EntityId object) const;
  const EntitySet& entities_of_type(TypeId type) const;
  const TypeSet& types_of(EntityId entity) const;
  bool has_type(EntityId entity, TypeId type) const;
  // Positions into tuples(), ascending.
  std::span<const uint32_t> tuple_indices_containing(EntityId entity) const;
  std::vector<Tuple> tuples_containing(EntityId entity) const;
  size_t fanout(EntityId entity) const {
    return tuple_indices_containing(entity).size();
  }

  // Tuples whose relation is in `allowlist`. Ids outside the vocabulary are
  // an error.
  KgStore FilterRelations(const std::set<RelationId>& allowlist) const;

  struct TypeFilterResult;
  // Ranks types by the number of tuples in which any member participates and
  // keeps the shortest prefix such that the tuples whose subject and object
  // both still carry a retained type make up at least `coverage_fraction` of
  // all tuples. Tuples with an endpoint left untyped are dropped.
  TypeFilterResult FilterTypes(double coverage_fraction) const;

  StoreStats Stats() const;
  const LoadReport& load_report() const { return load_report_; }

  void CheckEntity(EntityId id) const;
  void CheckRelation(RelationId id) const;
  void CheckType(TypeId id) const;

 private:
  explicit KgStore(std::shared_ptr<const Vocabulary> vocab);
  void BuildIndices();

  static uint64_t Key(RelationId rel, EntityId e) {
    return (uint64_t{rel.value()} << 32) | e.value();
  }

  std::shared_ptr<const Vocabulary> vocab_;
  std::vector<Tuple> tuples_;
  std::vector<std::pair<EntityId, TypeId>> memberships_;
  std::unordered_map<uint64_t, EntitySet> by_rel_subj_;
  std::unordered_map<uint64_t, EntitySet> by_rel_obj_;
  std::vector<std::vector<uint32_t>> by_entity_;
  std::vector<EntitySet> type_members_;
  std::vector<TypeSet> entity_types_;
  LoadReport load_report_;
};

struct KgStore::TypeFilterResult {
  KgStore store;
  std::set<TypeId> retained;
};

}  // namespace convqa

#endif  // CONVQA_KG_STORE_H_
