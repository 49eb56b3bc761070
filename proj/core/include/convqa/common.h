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

#ifndef CONVQA_COMMON_H_
#define CONVQA_COMMON_H_

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace convqa {

// All recoverable failures in the library are reported with this type. The
// `kind` is a short machine-readable tag ("load", "unknown_id", "type", ...)
// that the CLI prints alongside the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Dense identifier tagged by what it identifies, so an entity id cannot be
// passed where a relation id is expected.
template <typename Tag>
class StrongId {
 public:
  using value_type = uint32_t;

  constexpr StrongId() = default;
  constexpr explicit StrongId(value_type v) : value_(v) {}

  constexpr value_type value() const { return value_; }

  friend constexpr auto operator<=>(StrongId, StrongId) = default;

 private:
  value_type value_ = 0;
};

struct EntityTag {};
struct RelationTag {};
struct TypeTag {};

using EntityId = StrongId<EntityTag>;
using RelationId = StrongId<RelationTag>;
using TypeId = StrongId<TypeTag>;

// Sorted, duplicate-free set of ids backed by a vector. Set algebra is linear
// in the operand sizes.
template <typename Id>
class IdSet {
 public:
  using const_iterator = typename std::vector<Id>::const_iterator;

  IdSet() = default;
  IdSet(std::initializer_list<Id> ids) : ids_(ids) { Normalize(); }

  static IdSet FromUnsorted(std::vector<Id> ids) {
    IdSet s;
    s.ids_ = std::move(ids);
    s.Normalize();
    return s;
  }
  // Caller guarantees `ids` is strictly increasing.
  static IdSet FromSorted(std::vector<Id> ids) {
    IdSet s;
    s.ids_ = std::move(ids);
    return s;
  }

  bool contains(Id id) const {
    return std::binary_search(ids_.begin(), ids_.end(), id);
  }
  size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const_iterator begin() const { return ids_.begin(); }
  const_iterator end() const { return ids_.end(); }
  const std::vector<Id>& ids() const { return ids_; }
  Id operator[](size_t i) const { return ids_[i]; }

  friend bool operator==(const IdSet&, const IdSet&) = default;

 private:
  void Normalize() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  std::vector<Id> ids_;
};

using EntitySet = IdSet<EntityId>;
using TypeSet = IdSet<TypeId>;

template <typename Id>
IdSet<Id> SetUnion(const IdSet<Id>& a, const IdSet<Id>& b) {
  std::vector<Id> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return IdSet<Id>::FromSorted(std::move(out));
}

template <typename Id>
IdSet<Id> SetIntersection(const IdSet<Id>& a, const IdSet<Id>& b) {
  std::vector<Id> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return IdSet<Id>::FromSorted(std::move(out));
}

template <typename Id>
IdSet<Id> SetDifference(const IdSet<Id>& a, const IdSet<Id>& b) {
  std::vector<Id> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out));
  return IdSet<Id>::FromSorted(std::move(out));
}

// Visitor built from lambdas for std::visit.
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct Tuple {
  RelationId relation;
  EntityId subject;
  EntityId object;

  friend auto operator<=>(const Tuple&, const Tuple&) = default;
};

// SplitMix64 finalizer. Used for seed derivation and hashing where the
// result must be identical on every platform.
inline uint64_t Mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t TupleKey(const Tuple& t) {
  uint64_t h = Mix64(t.relation.value());
  h = Mix64(h ^ t.subject.value());
  return Mix64(h ^ (uint64_t{t.object.value()} << 1));
}

}  // namespace convqa

template <typename Tag>
struct std::hash<convqa::StrongId<Tag>> {
  size_t operator()(convqa::StrongId<Tag> id) const noexcept {
    return std::hash<uint32_t>{}(id.value());
  }
};

template <>
struct std::hash<convqa::Tuple> {
  size_t operator()(const convqa::Tuple& t) const noexcept {
    return static_cast<size_t>(convqa::TupleKey(t));
  }
};

#endif  // CONVQA_COMMON_H_
