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

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace convqa {
namespace {

const EntitySet kEmptyEntities;
const TypeSet kEmptyTypes;

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Calls fn(line_number, fields) for every record line in `path`.
template <typename Fn>
void ForEachRecord(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error("load", "cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    fn(line_no, SplitTabs(line));
  }
}

[[noreturn]] void Malformed(const std::filesystem::path& path, size_t line_no,
                            const std::string& what) {
  throw Error("load", path.filename().string() + ":" +
                          std::to_string(line_no) + ": " + what);
}

}  // namespace

// --- Vocabulary -----------------------------------------------------------

const Vocabulary::Entry& Vocabulary::entity(EntityId id) const {
  if (id.value() >= entities_.size()) {
    throw Error("unknown_id", "unknown entity id " + std::to_string(id.value()));
  }
  return entities_[id.value()];
}

const Vocabulary::Entry& Vocabulary::relation(RelationId id) const {
  if (id.value() >= relations_.size()) {
    throw Error("unknown_id",
                "unknown relation id " + std::to_string(id.value()));
  }
  return relations_[id.value()];
}

const Vocabulary::Entry& Vocabulary::type(TypeId id) const {
  if (id.value() >= types_.size()) {
    throw Error("unknown_id", "unknown type id " + std::to_string(id.value()));
  }
  return types_[id.value()];
}

const std::string& Vocabulary::type_plural(TypeId id) const {
  type(id);
  return type_plurals_[id.value()];
}

std::span<const EntityId> Vocabulary::EntitiesWithLabel(
    std::string_view label) const {
  auto it = entity_by_label_.find(std::string(label));
  if (it == entity_by_label_.end()) return {};
  return it->second;
}

std::optional<RelationId> Vocabulary::FindRelation(
    std::string_view label) const {
  auto it = relation_by_label_.find(std::string(label));
  if (it == relation_by_label_.end()) return std::nullopt;
  return it->second;
}

std::optional<TypeId> Vocabulary::FindType(std::string_view label) const {
  auto it = type_by_label_.find(std::string(label));
  if (it == type_by_label_.end()) return std::nullopt;
  return it->second;
}

std::optional<EntityId> Vocabulary::EntityByExternalId(
    std::string_view id) const {
  auto it = entity_by_ext_.find(std::string(id));
  if (it == entity_by_ext_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::RelationByExternalId(
    std::string_view id) const {
  auto it = relation_by_ext_.find(std::string(id));
  if (it == relation_by_ext_.end()) return std::nullopt;
  return it->second;
}

std::optional<TypeId> Vocabulary::TypeByExternalId(std::string_view id) const {
  auto it = type_by_ext_.find(std::string(id));
  if (it == type_by_ext_.end()) return std::nullopt;
  return it->second;
}

EntityId Vocabulary::AddEntity(std::string external_id, std::string label) {
  const EntityId id(static_cast<uint32_t>(entities_.size()));
  if (!entity_by_ext_.emplace(external_id, id).second) {
    throw Error("load", "duplicate entity id " + external_id);
  }
  entity_by_label_[label].push_back(id);
  entities_.push_back({std::move(external_id), std::move(label)});
  return id;
}

RelationId Vocabulary::AddRelation(std::string external_id, std::string label) {
  const RelationId id(static_cast<uint32_t>(relations_.size()));
  if (!relation_by_ext_.emplace(external_id, id).second) {
    throw Error("load", "duplicate relation id " + external_id);
  }
  if (!relation_by_label_.emplace(label, id).second) {
    throw Error("load", "duplicate relation label " + label);
  }
  relations_.push_back({std::move(external_id), std::move(label)});
  return id;
}

TypeId Vocabulary::AddType(std::string external_id, std::string label,
                           std::string plural) {
  const TypeId id(static_cast<uint32_t>(types_.size()));
  if (!type_by_ext_.emplace(external_id, id).second) {
    throw Error("load", "duplicate type id " + external_id);
  }
  if (!type_by_label_.emplace(label, id).second) {
    throw Error("load", "duplicate type label " + label);
  }
  if (plural.empty()) plural = DefaultPlural(label);
  type_plurals_.push_back(std::move(plural));
  types_.push_back({std::move(external_id), std::move(label)});
  return id;
}

std::string DefaultPlural(std::string_view s) {
  std::string out(s);
  if (out.empty()) return out;
  auto ends_with = [&](std::string_view suffix) {
    return out.size() >= suffix.size() &&
           out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  const auto is_vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
  };
  if (out.size() >= 2 && out.back() == 'y' && !is_vowel(out[out.size() - 2])) {
    out.pop_back();
    return out + "ies";
  }
  if (ends_with("s") || ends_with("x") || ends_with("z") || ends_with("ch") ||
      ends_with("sh")) {
    return out + "es";
  }
  return out + "s";
}

// --- KgStore --------------------------------------------------------------

KgStore::KgStore() : KgStore(std::make_shared<Vocabulary>()) {}

KgStore::KgStore(std::shared_ptr<const Vocabulary> vocab)
    : vocab_(std::move(vocab)) {}

KgStore KgStore::Build(std::shared_ptr<const Vocabulary> vocab,
                       std::vector<Tuple> tuples,
                       std::vector<std::pair<EntityId, TypeId>> memberships) {
  KgStore store(std::move(vocab));
  for (const auto& [e, t] : memberships) {
    store.CheckEntity(e);
    store.CheckType(t);
  }
  std::sort(memberships.begin(), memberships.end());
  memberships.erase(std::unique(memberships.begin(), memberships.end()),
                    memberships.end());
  store.memberships_ = std::move(memberships);

  for (const Tuple& t : tuples) {
    store.CheckRelation(t.relation);
    store.CheckEntity(t.subject);
    store.CheckEntity(t.object);
  }
  const size_t before = tuples.size();
  std::sort(tuples.begin(), tuples.end());
  tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
  store.load_report_.duplicate_tuples = before - tuples.size();
  store.tuples_ = std::move(tuples);
  store.BuildIndices();

  for (const Tuple& t : store.tuples_) {
    for (EntityId e : {t.subject, t.object}) {
      if (store.entity_types_[e.value()].empty()) {
        throw Error("load", "entity " + store.vocab_->entity(e).external_id +
                                " appears in a tuple but has no type");
      }
    }
  }
  return store;
}

void KgStore::BuildIndices() {
  const size_t n_entities = vocab_->num_entities();
  by_rel_subj_.clear();
  by_rel_obj_.clear();
  by_entity_.assign(n_entities, {});
  type_members_.assign(vocab_->num_types(), {});
  entity_types_.assign(n_entities, {});

  std::unordered_map<uint64_t, std::vector<EntityId>> objs;
  std::unordered_map<uint64_t, std::vector<EntityId>> subjs;
  for (uint32_t i = 0; i < tuples_.size(); ++i) {
    const Tuple& t = tuples_[i];
    objs[Key(t.relation, t.subject)].push_back(t.object);
    subjs[Key(t.relation, t.object)].push_back(t.subject);
    by_entity_[t.subject.value()].push_back(i);
    if (t.object != t.subject) by_entity_[t.object.value()].push_back(i);
  }
  for (auto& [k, v] : objs) by_rel_subj_[k] = EntitySet::FromUnsorted(std::move(v));
  for (auto& [k, v] : subjs) by_rel_obj_[k] = EntitySet::FromUnsorted(std::move(v));

  std::vector<std::vector<EntityId>> members(vocab_->num_types());
  std::vector<std::vector<TypeId>> types(n_entities);
  for (const auto& [e, t] : memberships_) {
    members[t.value()].push_back(e);
    types[e.value()].push_back(t);
  }
  for (size_t t = 0; t < members.size(); ++t) {
    type_members_[t] = EntitySet::FromSorted(std::move(members[t]));
  }
  for (size_t e = 0; e < types.size(); ++e) {
    entity_types_[e] = TypeSet::FromUnsorted(std::move(types[e]));
  }
}

KgStore KgStore::Load(const std::filesystem::path& tuple_file,
                      const std::filesystem::path& label_file,
                      const std::filesystem::path& type_file) {
  auto vocab = std::make_shared<Vocabulary>();
  ForEachRecord(label_file, [&](size_t line_no,
                                const std::vector<std::string_view>& f) {
    if (f.size() != 3 && f.size() != 4) {
      Malformed(label_file, line_no, "expected 3 or 4 tab-separated fields");
    }
    if (f[0].empty() || f[2].empty()) {
      Malformed(label_file, line_no, "empty id or label");
    }
    if (f[1] != "E" && f[1] != "R" && f[1] != "T") {
      Malformed(label_file, line_no, "kind must be E, R or T");
    }
    std::string id(f[0]), label(f[2]);
    try {
      if (f[1] == "E") {
        vocab->AddEntity(id, label);
      } else if (f[1] == "R") {
        vocab->AddRelation(id, label);
      } else {
        vocab->AddType(id, label, f.size() == 4 ? std::string(f[3]) : "");
      }
    } catch (const Error& e) {
      Malformed(label_file, line_no, e.what());
    }
  });

  std::vector<std::pair<EntityId, TypeId>> memberships;
  ForEachRecord(type_file, [&](size_t line_no,
                               const std::vector<std::string_view>& f) {
    if (f.size() != 2) {
      Malformed(type_file, line_no, "expected 2 tab-separated fields");
    }
    auto e = vocab->EntityByExternalId(f[0]);
    if (!e) {
      Malformed(type_file, line_no, "unknown entity id " + std::string(f[0]));
    }
    auto t = vocab->TypeByExternalId(f[1]);
    if (!t) Malformed(type_file, line_no, "unknown type id " + std::string(f[1]));
    memberships.emplace_back(*e, *t);
  });

  std::vector<Tuple> tuples;
  std::vector<bool> typed(vocab->num_entities(), false);
  for (const auto& m : memberships) typed[m.first.value()] = true;
  ForEachRecord(tuple_file, [&](size_t line_no,
                                const std::vector<std::string_view>& f) {
    if (f.size() != 3) {
      Malformed(tuple_file, line_no, "expected 3 tab-separated fields");
    }
    auto r = vocab->RelationByExternalId(f[0]);
    if (!r) {
      Malformed(tuple_file, line_no, "unknown relation id " + std::string(f[0]));
    }
    Tuple t{*r, {}, {}};
    for (int k = 1; k <= 2; ++k) {
      auto e = vocab->EntityByExternalId(f[k]);
      if (!e) {
        Malformed(tuple_file, line_no, "unknown entity id " + std::string(f[k]));
      }
      if (!typed[e->value()]) {
        Malformed(tuple_file, line_no,
                  "entity id " + std::string(f[k]) + " has no type");
      }
      (k == 1 ? t.subject : t.object) = *e;
    }
    tuples.push_back(t);
  });

  return Build(std::move(vocab), std::move(tuples), std::move(memberships));
}

KgStore KgStore::LoadDirectory(const std::filesystem::path& dir) {
  return Load(dir / "tuples.tsv", dir / "labels.tsv", dir / "types.tsv");
}

void KgStore::WriteDirectory(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream labels(dir / "labels.tsv");
  for (uint32_t i = 0; i < num_entities(); ++i) {
    const auto& e = vocab_->entity(EntityId(i));
    labels << e.external_id << "\tE\t" << e.label << '\n';
  }
  for (uint32_t i = 0; i < num_relations(); ++i) {
    const auto& r = vocab_->relation(RelationId(i));
    labels << r.external_id << "\tR\t" << r.label << '\n';
  }
  for (uint32_t i = 0; i < num_types(); ++i) {
    const auto& t = vocab_->type(TypeId(i));
    labels << t.external_id << "\tT\t" << t.label << '\t'
           << vocab_->type_plural(TypeId(i)) << '\n';
  }
  std::ofstream tuples(dir / "tuples.tsv");
  for (const Tuple& t : tuples_) {
    tuples << vocab_->relation(t.relation).external_id << '\t'
           << vocab_->entity(t.subject).external_id << '\t'
           << vocab_->entity(t.object).external_id << '\n';
  }
  std::ofstream types(dir / "types.tsv");
  for (const auto& [e, t] : memberships_) {
    types << vocab_->entity(e).external_id << '\t'
          << vocab_->type(t).external_id << '\n';
  }
  if (!labels || !tuples || !types) {
    throw Error("io", "failed writing store to " + dir.string());
  }
}

EntityId KgStore::entity(std::string_view label) const {
  auto ids = vocab_->EntitiesWithLabel(label);
  if (ids.empty()) {
    throw Error("unknown_id", "unknown entity '" + std::string(label) + "'");
  }
  if (ids.size() > 1) {
    throw Error("unknown_id", "ambiguous entity label '" + std::string(label) +
                                  "' (" + std::to_string(ids.size()) +
                                  " entities)");
  }
  return ids.front();
}

RelationId KgStore::relation(std::string_view label) const {
  auto r = vocab_->FindRelation(label);
  if (!r) {
    throw Error("unknown_id", "unknown relation '" + std::string(label) + "'");
  }
  return *r;
}

TypeId KgStore::type(std::string_view label) const {
  auto t = vocab_->FindType(label);
  if (!t) throw Error("unknown_id", "unknown type '" + std::string(label) + "'");
  return *t;
}

void KgStore::CheckEntity(EntityId id) const { vocab_->entity(id); }
void KgStore::CheckRelation(RelationId id) const { vocab_->relation(id); }
void KgStore::CheckType(TypeId id) const { vocab_->type(id); }

bool KgStore::contains(const Tuple& t) const {
  return std::binary_search(tuples_.begin(), tuples_.end(), t);
}

const EntitySet& KgStore::objects_of(RelationId rel, EntityId subject) const {
  CheckRelation(rel);
  CheckEntity(subject);
  auto it = by_rel_subj_.find(Key(rel, subject));
  return it == by_rel_subj_.end() ? kEmptyEntities : it->second;
}

const EntitySet& KgStore::subjects_of(RelationId rel, EntityId object) const {
  CheckRelation(rel);
  CheckEntity(object);
  auto it = by_rel_obj_.find(Key(rel, object));
  return it == by_rel_obj_.end() ? kEmptyEntities : it->second;
}

const EntitySet& KgStore::entities_of_type(TypeId type) const {
  CheckType(type);
  return type_members_[type.value()];
}

const TypeSet& KgStore::types_of(EntityId entity) const {
  CheckEntity(entity);
  return entity_types_[entity.value()];
}

bool KgStore::has_type(EntityId entity, TypeId type) const {
  return types_of(entity).contains(type);
}

std::span<const uint32_t> KgStore::tuple_indices_containing(
    EntityId entity) const {
  CheckEntity(entity);
  return by_entity_[entity.value()];
}

std::vector<Tuple> KgStore::tuples_containing(EntityId entity) const {
  std::vector<Tuple> out;
  for (uint32_t i : tuple_indices_containing(entity)) out.push_back(tuples_[i]);
  return out;
}

KgStore KgStore::FilterRelations(const std::set<RelationId>& allowlist) const {
  for (RelationId r : allowlist) CheckRelation(r);
  KgStore out(vocab_);
  out.memberships_ = memberships_;
  for (const Tuple& t : tuples_) {
    if (allowlist.count(t.relation)) out.tuples_.push_back(t);
  }
  out.BuildIndices();
  return out;
}

KgStore::TypeFilterResult KgStore::FilterTypes(double coverage_fraction) const {
  if (!(coverage_fraction >= 0.0 && coverage_fraction <= 1.0)) {
    throw Error("range", "coverage_fraction must lie in [0, 1]");
  }
  // Participation: tuples in which at least one member of the type occurs.
  std::vector<size_t> participation(num_types(), 0);
  std::vector<uint32_t> seen_in(num_types(), UINT32_MAX);
  for (uint32_t i = 0; i < tuples_.size(); ++i) {
    for (EntityId e : {tuples_[i].subject, tuples_[i].object}) {
      for (TypeId t : entity_types_[e.value()]) {
        if (seen_in[t.value()] != i) {
          seen_in[t.value()] = i;
          ++participation[t.value()];
        }
      }
    }
  }
  std::vector<TypeId> ranked;
  for (uint32_t t = 0; t < num_types(); ++t) ranked.emplace_back(t);
  std::stable_sort(ranked.begin(), ranked.end(), [&](TypeId a, TypeId b) {
    return participation[a.value()] > participation[b.value()];
  });

  std::vector<bool> retained_flag(num_types(), false);
  auto covered = [&](EntityId e) {
    for (TypeId t : entity_types_[e.value()]) {
      if (retained_flag[t.value()]) return true;
    }
    return false;
  };
  auto coverage = [&]() {
    if (tuples_.empty()) return 1.0;
    size_t n = 0;
    for (const Tuple& t : tuples_) n += covered(t.subject) && covered(t.object);
    return static_cast<double>(n) / static_cast<double>(tuples_.size());
  };

  std::set<TypeId> retained;
  // An empty store is covered by the empty prefix; otherwise grow the prefix
  // until the threshold is met.
  if (!(tuples_.empty() || coverage_fraction <= 0.0)) {
    for (TypeId t : ranked) {
      retained_flag[t.value()] = true;
      retained.insert(t);
      if (coverage() >= coverage_fraction) break;
    }
  }

  KgStore out(vocab_);
  for (const auto& m : memberships_) {
    if (retained_flag[m.second.value()]) out.memberships_.push_back(m);
  }
  for (const Tuple& t : tuples_) {
    if (covered(t.subject) && covered(t.object)) out.tuples_.push_back(t);
  }
  out.BuildIndices();
  return {std::move(out), std::move(retained)};
}

StoreStats KgStore::Stats() const {
  StoreStats s;
  s.tuples = tuples_.size();
  s.entities = num_entities();
  s.relations = num_relations();
  s.types = num_types();
  for (const auto& postings : by_entity_) {
    if (postings.empty()) continue;
    ++s.active_entities;
    ++s.fanout_histogram[postings.size()];
    if (postings.size() >= 3) ++s.entities_fanout_at_least_3;
  }
  for (const Tuple& t : tuples_) {
    if (objects_of(t.relation, t.subject).size() > 1) {
      ++s.one_many_tuples;
    } else {
      ++s.one_one_tuples;
    }
  }
  return s;
}

}  // namespace convqa
