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

// Question templates: surfaces with typed slot markers bound to a plan schema.
//
// Marker grammar: ⟨name[:k][:pl]⟩ where name is one of relation,
// subject_type, object_type, entity or n, k is a 1-based index (default 1)
// and :pl selects the plural label of a type. The plan schema is canonical
// plan text whose atoms may be markers (without :pl).
//
// Template file: one JSON object per line with fields
//   id, surface (array: singular variant, optional plural variant),
//   direction ("object_based" | "subject_based"), plan_schema,
//   paraphrase_group, and optionally
//   fixed        {"relation": "flows_through", ...}  slot key -> label
//   entity_types {"1": "subject_type"}               entity index -> type slot

#ifndef CONVQA_TEMPLATES_H_
#define CONVQA_TEMPLATES_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "convqa/kg_store.h"
#include "convqa/plan_text.h"
#include "convqa/query_algebra.h"
#include "convqa/rng.h"

namespace convqa {

struct SlotRef {
  std::string name;
  int index = 1;
  bool plural = false;

  // "entity:2"; the plural flag is not part of the key.
  std::string Key() const;
  // Marker text as it appears in a plan schema, e.g. "⟨entity:2⟩". Index 1
  // is written without the index.
  std::string Marker() const;

  friend bool operator==(const SlotRef&, const SlotRef&) = default;
};

// Markers in order of appearance. Throws Error("template") on an unknown
// slot name or an unterminated marker.
std::vector<SlotRef> FindMarkers(std::string_view text);

enum class TemplateDirection { kObjectBased, kSubjectBased };

struct QuestionTemplate {
  std::string id;
  // [0] singular wording, [1] plural wording (optional).
  std::vector<std::string> surface;
  TemplateDirection direction = TemplateDirection::kObjectBased;
  SyntaxNode plan_schema;
  std::string paraphrase_group;
  // Slot key -> label of a relation or type fixed by the template.
  std::map<std::string, std::string> fixed;
  // Entity index -> key of the type slot the entity must belong to.
  std::map<int, std::string> entity_types;

  const std::string& Singular() const { return surface.front(); }
  const std::string& Plural() const { return surface.size() > 1 ? surface[1] : surface[0]; }
};

// Checks the invariants listed at the top of this file and fills in default
// entity type constraints. Throws Error("template") naming the template id.
void ValidateTemplate(QuestionTemplate& t);

QuestionTemplate ParseTemplateJson(std::string_view json_line);
std::string TemplateToJson(const QuestionTemplate& t);
std::vector<QuestionTemplate> LoadTemplates(const std::filesystem::path& path);

struct Bindings {
  std::map<int, RelationId> relation;
  std::map<int, TypeId> subject_type;
  std::map<int, TypeId> object_type;
  std::map<int, EntityId> entity;
  std::optional<uint64_t> n;

  friend bool operator==(const Bindings&, const Bindings&) = default;
};

// Bindings with the template's fixed slots merged in. Throws Error("type")
// when a binding contradicts a fixed slot or an entity lacks its required
// type, Error("template") when a slot used by the template is unbound.
Bindings ResolveBindings(const KgStore& store, const QuestionTemplate& t,
                         const Bindings& bindings);

// `entity_text` replaces the rendering of selected entity slots, e.g.
// {1: "that river"}.
std::string RenderSurface(const KgStore& store, const QuestionTemplate& t,
                          const Bindings& resolved, size_t variant = 0,
                          const std::map<int, std::string>& entity_text = {});
QueryPlan BindPlan(const KgStore& store, const QuestionTemplate& t,
                   const Bindings& resolved);

struct Instantiation {
  std::string template_id;
  Bindings bindings;
  std::string question;
  QueryPlan plan;
  AnswerSet answer;
};

struct Rejection {
  // "empty_answer" or "answer_cap".
  std::string reason;
};

struct InstantiateOptions {
  size_t answer_cap = 1000;
  size_t variant = 0;
  ExecOptions exec;
};

std::variant<Instantiation, Rejection> Instantiate(
    const KgStore& store, const QuestionTemplate& t, const Bindings& bindings,
    const InstantiateOptions& options = {});

// --- Complex-question transforms --------------------------------------------
//
// All transforms take a simple template whose plan is Retrieve over a single
// lookup anchored at ⟨entity:1⟩ (TransformToCount also accepts logical,
// threshold and comparative templates). They throw Error("template") when
// the input has the wrong shape.

QuestionTemplate TransformToCount(const QuestionTemplate& t);
// Adds ⟨entity:2⟩ with the same relation and connective "and" / "or" /
// "but not".
QuestionTemplate TransformLogical(const QuestionTemplate& t, LogicalOp op);
// Joins two templates with the same answer type; the second template's
// slots are renumbered to index 2.
QuestionTemplate TransformMultiRelation(const QuestionTemplate& a,
                                        const QuestionTemplate& b, LogicalOp op);
QuestionTemplate TransformArgOpt(const QuestionTemplate& t, Extremum extremum);
QuestionTemplate TransformThreshold(const QuestionTemplate& t,
                                    Comparator comparator);
// ⟨entity:1⟩ becomes the reference entity, of the answer type.
QuestionTemplate TransformComparative(const QuestionTemplate& t,
                                      Comparison comparison);
// Yes/no question over `facts` (1 or 2) candidate answers ⟨entity:2⟩...
QuestionTemplate TransformVerify(const QuestionTemplate& t, int facts);

std::string_view LogicalOpWord(LogicalOp op);

// --- Binding sampler --------------------------------------------------------

// True for templates whose plan is Retrieve over one lookup anchored at
// ⟨entity:1⟩, the input shape of the transforms above.
bool IsSimpleTemplate(const QuestionTemplate& t);

// Draws bindings guided by the store's tuples (a random tuple per relation
// slot, its endpoint types for the type slots) and instantiates. Slots bound
// in `preset` are kept; a preset entity restricts the tuple drawn for the
// relation its type slot refers to. Returns nullopt after `attempts`
// rejections.
std::optional<Instantiation> SampleInstantiation(
    const KgStore& store, const QuestionTemplate& t, Rng& rng,
    const InstantiateOptions& options = {}, int attempts = 20,
    const Bindings& preset = {});

// --- Pathology filter --------------------------------------------------------

struct PathologyConfig {
  std::set<std::string> generic_relations{"lake_outflow", "fabrication_method"};
  std::vector<std::pair<std::string, std::string>> peer_blocklist{
      {"religion", "social group"}};
};

PathologyConfig LoadPathologyConfig(const std::filesystem::path& path);

struct PathologyVerdict {
  bool accepted = true;
  // "label_overlap", "generic_relation" or "peer_block" when rejected.
  std::string reason;
};

PathologyVerdict PathologyFilter(const KgStore& store,
                                 const Instantiation& inst,
                                 const PathologyConfig& config = {});

}  // namespace convqa

#endif  // CONVQA_TEMPLATES_H_
