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

#include "convqa/templates.h"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "json.hpp"

namespace convqa {
namespace {

using Json = nlohmann::json;

constexpr std::string_view kOpen = "\xE2\x9F\xA8";   // ⟨
constexpr std::string_view kClose = "\xE2\x9F\xA9";  // ⟩

const std::set<std::string> kSlotNames = {"relation", "subject_type",
                                          "object_type", "entity", "n"};

[[noreturn]] void Fail(const std::string& id, const std::string& what) {
  throw Error("template", (id.empty() ? std::string("template") : id) + ": " + what);
}

SlotRef ParseMarkerBody(std::string_view body) {
  SlotRef ref;
  std::vector<std::string_view> parts;
  size_t start = 0;
  while (true) {
    const size_t colon = body.find(':', start);
    parts.push_back(body.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  ref.name = std::string(parts[0]);
  if (!kSlotNames.count(ref.name)) {
    throw Error("template", "unknown slot '" + ref.name + "'");
  }
  for (size_t i = 1; i < parts.size(); ++i) {
    if (parts[i] == "pl") {
      ref.plural = true;
    } else if (!parts[i].empty() &&
               std::all_of(parts[i].begin(), parts[i].end(),
                           [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      ref.index = std::stoi(std::string(parts[i]));
      if (ref.index < 1) throw Error("template", "slot index must be >= 1");
    } else {
      throw Error("template", "bad slot qualifier '" + std::string(parts[i]) + "'");
    }
  }
  return ref;
}

// Calls fn(ref, begin, end) for every marker, with byte offsets of the
// whole marker.
template <typename Fn>
void ScanMarkers(std::string_view text, Fn&& fn) {
  size_t pos = 0;
  while (true) {
    const size_t open = text.find(kOpen, pos);
    if (open == std::string_view::npos) return;
    const size_t close = text.find(kClose, open);
    if (close == std::string_view::npos) {
      throw Error("template", "unterminated slot marker in '" + std::string(text) + "'");
    }
    const size_t body = open + kOpen.size();
    fn(ParseMarkerBody(text.substr(body, close - body)), open, close + kClose.size());
    pos = close + kClose.size();
  }
}

std::pair<std::string, int> SplitKey(const std::string& key) {
  const size_t colon = key.find(':');
  if (colon == std::string::npos) return {key, 1};
  return {key.substr(0, colon), std::stoi(key.substr(colon + 1))};
}

std::string KeyOf(const std::string& name, int index) {
  return name + ":" + std::to_string(index);
}

std::string NormalizeKey(const std::string& key) {
  auto [name, index] = SplitKey(key);
  return KeyOf(name, index);
}

bool IsTypeSlot(const std::string& name) {
  return name == "subject_type" || name == "object_type";
}

// Slot keys used anywhere in the surfaces or plan schema.
std::set<std::string> UsedSlots(const QuestionTemplate& t) {
  std::set<std::string> used;
  for (const std::string& s : t.surface) {
    for (const SlotRef& r : FindMarkers(s)) used.insert(r.Key());
  }
  ForEachAtom(t.plan_schema, [&](const SyntaxNode& atom) {
    if (atom.quoted) return;
    for (const SlotRef& r : FindMarkers(atom.text)) used.insert(r.Key());
  });
  return used;
}

std::set<std::string> PlanSlots(const SyntaxNode& schema) {
  std::set<std::string> out;
  ForEachAtom(schema, [&](const SyntaxNode& atom) {
    if (atom.quoted) return;
    for (const SlotRef& r : FindMarkers(atom.text)) out.insert(r.Key());
  });
  return out;
}

std::string MarkerText(const std::string& key, bool plural = false) {
  auto [name, index] = SplitKey(key);
  SlotRef r{name, index, plural};
  std::string m = std::string(kOpen) + name;
  if (index != 1) m += ":" + std::to_string(index);
  if (plural) m += ":pl";
  return m + std::string(kClose);
}

SyntaxNode MarkerAtom(const std::string& key) { return SyntaxNode::Atom(MarkerText(key)); }

// Key of a schema atom that is exactly one marker, or "".
std::string AtomSlot(const SyntaxNode& atom) {
  if (atom.is_call || atom.quoted) return "";
  const auto refs = FindMarkers(atom.text);
  if (refs.size() != 1) return "";
  return refs[0].Key();
}

// Rewrites every marker whose key is in `renames`.
std::string RenameText(const std::string& text,
                       const std::map<std::string, std::string>& renames) {
  std::string out;
  size_t last = 0;
  ScanMarkers(text, [&](const SlotRef& r, size_t begin, size_t end) {
    out.append(text, last, begin - last);
    auto it = renames.find(r.Key());
    out += it == renames.end() ? text.substr(begin, end - begin)
                               : MarkerText(it->second, r.plural);
    last = end;
  });
  out.append(text, last, std::string::npos);
  return out;
}

// Rewrites every marker into its canonical spelling (index 1 omitted).
std::string CanonicalText(const std::string& text) {
  std::string out;
  size_t last = 0;
  ScanMarkers(text, [&](const SlotRef& r, size_t begin, size_t end) {
    out.append(text, last, begin - last);
    out += MarkerText(r.Key(), r.plural);
    last = end;
  });
  out.append(text, last, std::string::npos);
  return out;
}

SyntaxNode CanonicalSchema(const SyntaxNode& node) {
  if (!node.is_call) {
    return node.quoted ? node : SyntaxNode::Atom(CanonicalText(node.text));
  }
  SyntaxNode out = node;
  for (SyntaxNode& a : out.args) a = CanonicalSchema(a);
  return out;
}

SyntaxNode RenameSchema(const SyntaxNode& node,
                        const std::map<std::string, std::string>& renames) {
  if (!node.is_call) {
    if (node.quoted) return node;
    return SyntaxNode::Atom(RenameText(node.text, renames));
  }
  SyntaxNode out = node;
  for (SyntaxNode& a : out.args) a = RenameSchema(a, renames);
  return out;
}

std::string ReplaceFirst(const std::string& id, const std::string& text,
                         const std::string& from, const std::string& to) {
  const size_t pos = text.find(from);
  if (pos == std::string::npos) Fail(id, "surface lacks '" + from + "'");
  return text.substr(0, pos) + to + text.substr(pos + from.size());
}

// The single lookup of a simple Retrieve template, anchored at ⟨entity:1⟩.
const SyntaxNode& SimpleLookup(const QuestionTemplate& t) {
  const SyntaxNode& p = t.plan_schema;
  if (!p.is_call || p.text != "Retrieve" || p.args.size() != 1 ||
      !p.args[0].is_call || p.args[0].text != "Lookup" || p.args[0].args.size() != 4) {
    Fail(t.id, "transform needs a simple Retrieve(Lookup(...)) template");
  }
  const SyntaxNode& l = p.args[0];
  if (AtomSlot(l.args[2]) != "entity:1") Fail(t.id, "lookup must be anchored at entity 1");
  return l;
}

std::string AnswerSlot(const QuestionTemplate& t, const SyntaxNode& lookup) {
  const std::string key = AtomSlot(lookup.args[3]);
  if (key.empty() || !IsTypeSlot(SplitKey(key).first)) {
    Fail(t.id, "lookup result type must be a type slot");
  }
  return key;
}

std::string AnchorTypeSlot(const QuestionTemplate& t) {
  auto it = t.entity_types.find(1);
  if (it == t.entity_types.end()) Fail(t.id, "entity 1 has no type slot");
  return it->second;
}

SyntaxNode FlipDirection(const SyntaxNode& dir) {
  return SyntaxNode::Atom(dir.text == "obj" || dir.text == "object" ? "subj" : "obj");
}

// "Which ⟨type:pl⟩ rest" -> "rest".
std::string AfterWhichType(const QuestionTemplate& t, const std::string& surface) {
  if (surface.rfind("Which ", 0) != 0) Fail(t.id, "surface must start with 'Which'");
  const size_t close = surface.find(kClose);
  if (close == std::string::npos) Fail(t.id, "surface must name the answer type");
  size_t rest = close + kClose.size();
  while (rest < surface.size() && surface[rest] == ' ') ++rest;
  return surface.substr(rest);
}

std::string StripQuestionMark(const QuestionTemplate& t, const std::string& s) {
  if (s.size() < 2 || s.compare(s.size() - 2, 2, " ?") != 0) {
    Fail(t.id, "surface must end with ' ?'");
  }
  return s.substr(0, s.size() - 2);
}

QuestionTemplate Derived(const QuestionTemplate& t, const std::string& suffix) {
  QuestionTemplate out = t;
  out.id = t.id + "+" + suffix;
  out.paraphrase_group = t.paraphrase_group + "+" + suffix;
  return out;
}

std::string Lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string RelationWords(std::string label) {
  std::replace(label.begin(), label.end(), '_', ' ');
  return label;
}

}  // namespace

std::string SlotRef::Key() const { return KeyOf(name, index); }

std::string SlotRef::Marker() const { return MarkerText(Key(), false); }

std::vector<SlotRef> FindMarkers(std::string_view text) {
  std::vector<SlotRef> out;
  ScanMarkers(text, [&](const SlotRef& r, size_t, size_t) { out.push_back(r); });
  return out;
}

void ValidateTemplate(QuestionTemplate& t) {
  if (t.id.empty()) Fail("", "missing id");
  if (t.surface.empty() || t.surface.size() > 2) {
    Fail(t.id, "surface needs one or two variants");
  }
  std::set<std::string> surface_slots;
  std::set<std::string> surface_entities;
  try {
    for (const std::string& s : t.surface) {
      for (const SlotRef& r : FindMarkers(s)) {
        surface_slots.insert(r.Key());
        if (r.name == "entity") surface_entities.insert(r.Key());
        if (r.plural && !IsTypeSlot(r.name)) Fail(t.id, "only type slots take :pl");
      }
    }
  } catch (const Error& e) {
    if (e.kind() == "template" && std::string(e.what()).rfind(t.id + ":", 0) == 0) throw;
    Fail(t.id, e.what());
  }
  for (std::string& s : t.surface) s = CanonicalText(s);
  std::set<std::string> plan_slots;
  try {
    t.plan_schema = CanonicalSchema(t.plan_schema);
    plan_slots = PlanSlots(t.plan_schema);
  } catch (const Error& e) {
    Fail(t.id, e.what());
  }
  bool plural_in_plan = false;
  ForEachAtom(t.plan_schema, [&](const SyntaxNode& a) {
    if (!a.quoted && a.text.find(":pl" + std::string(kClose)) != std::string::npos) {
      plural_in_plan = true;
    }
  });
  if (plural_in_plan) Fail(t.id, "plan schema markers cannot be plural");

  for (const std::string& key : surface_slots) {
    if (SplitKey(key).first == "n") continue;
    if (!plan_slots.count(key)) {
      Fail(t.id, "slot " + MarkerText(key) + " appears in the surface but not in the plan");
    }
  }
  for (const std::string& key : plan_slots) {
    if (SplitKey(key).first == "entity" && !surface_entities.count(key)) {
      Fail(t.id, "slot " + MarkerText(key) + " appears in the plan but not in the surface");
    }
  }

  std::map<std::string, std::string> fixed;
  for (const auto& [key, label] : t.fixed) {
    const std::string k = NormalizeKey(key);
    const std::string name = SplitKey(k).first;
    if (name != "relation" && !IsTypeSlot(name)) Fail(t.id, "only relations and types can be fixed");
    fixed[k] = label;
  }
  t.fixed = std::move(fixed);

  // Direction must agree with the first lookup.
  std::function<const SyntaxNode*(const SyntaxNode&)> first_lookup =
      [&](const SyntaxNode& n) -> const SyntaxNode* {
    if (!n.is_call) return nullptr;
    if (n.text == "Lookup" && n.args.size() == 4) return &n;
    for (const SyntaxNode& a : n.args) {
      if (const SyntaxNode* l = first_lookup(a)) return l;
    }
    return nullptr;
  };
  if (const SyntaxNode* l = first_lookup(t.plan_schema)) {
    const std::string& d = l->args[0].text;
    const bool obj = d == "obj" || d == "object";
    if (obj != (t.direction == TemplateDirection::kObjectBased)) {
      Fail(t.id, "direction disagrees with the plan's lookup");
    }
  }

  for (const auto& [k, slot] : t.entity_types) {
    if (!surface_entities.count(KeyOf("entity", k))) {
      Fail(t.id, "entity_types names an entity slot that is not used");
    }
    if (!IsTypeSlot(SplitKey(slot).first)) Fail(t.id, "entity_types must name a type slot");
  }
  std::map<int, std::string> types;
  for (const auto& [k, slot] : t.entity_types) types[k] = NormalizeKey(slot);
  for (const std::string& key : surface_entities) {
    const int k = SplitKey(key).second;
    if (!types.count(k)) {
      types[k] = t.direction == TemplateDirection::kObjectBased ? "subject_type:1"
                                                                : "object_type:1";
    }
  }
  t.entity_types = std::move(types);
}

QuestionTemplate ParseTemplateJson(std::string_view json_line) {
  Json j;
  try {
    j = Json::parse(json_line);
  } catch (const Json::exception& e) {
    throw Error("template", std::string("bad JSON: ") + e.what());
  }
  QuestionTemplate t;
  try {
    t.id = j.at("id").get<std::string>();
    if (j.at("surface").is_string()) {
      t.surface = {j.at("surface").get<std::string>()};
    } else {
      t.surface = j.at("surface").get<std::vector<std::string>>();
    }
    const std::string dir = j.at("direction").get<std::string>();
    if (dir == "object_based") {
      t.direction = TemplateDirection::kObjectBased;
    } else if (dir == "subject_based") {
      t.direction = TemplateDirection::kSubjectBased;
    } else {
      Fail(t.id, "direction must be object_based or subject_based");
    }
    t.paraphrase_group = j.value("paraphrase_group", t.id);
    if (j.contains("fixed")) t.fixed = j.at("fixed").get<std::map<std::string, std::string>>();
    if (j.contains("entity_types")) {
      for (const auto& [k, v] : j.at("entity_types").items()) {
        t.entity_types[std::stoi(k)] = v.get<std::string>();
      }
    }
    const std::string schema = j.at("plan_schema").get<std::string>();
    try {
      t.plan_schema = ParseSyntax(schema);
    } catch (const Error& e) {
      Fail(t.id, e.what());
    }
  } catch (const Json::exception& e) {
    Fail(t.id, std::string("bad record: ") + e.what());
  }
  ValidateTemplate(t);
  return t;
}

std::string TemplateToJson(const QuestionTemplate& t) {
  Json j;
  j["id"] = t.id;
  j["surface"] = t.surface;
  j["direction"] = t.direction == TemplateDirection::kObjectBased ? "object_based"
                                                                  : "subject_based";
  j["plan_schema"] = PrintSyntax(t.plan_schema);
  j["paraphrase_group"] = t.paraphrase_group;
  if (!t.fixed.empty()) j["fixed"] = t.fixed;
  if (!t.entity_types.empty()) {
    Json et = Json::object();
    for (const auto& [k, v] : t.entity_types) et[std::to_string(k)] = v;
    j["entity_types"] = et;
  }
  return j.dump();
}

std::vector<QuestionTemplate> LoadTemplates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::vector<QuestionTemplate> out;
  std::set<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    QuestionTemplate t;
    try {
      t = ParseTemplateJson(line);
    } catch (const Error& e) {
      throw Error("template", path.filename().string() + ":" +
                                  std::to_string(line_no) + ": " + e.what());
    }
    if (!ids.insert(t.id).second) Fail(t.id, "duplicate template id");
    out.push_back(std::move(t));
  }
  return out;
}

// --- Binding --------------------------------------------------------------------

namespace {

template <typename Id>
void Merge(const QuestionTemplate& t, std::map<int, Id>& slot, int index, Id value,
           const std::string& key) {
  auto [it, inserted] = slot.emplace(index, value);
  if (!inserted && it->second != value) {
    throw Error("type", t.id + ": binding for " + MarkerText(key) +
                            " contradicts the template's fixed value");
  }
}

bool IsBound(const Bindings& b, const std::string& key) {
  auto [name, index] = SplitKey(key);
  if (name == "relation") return b.relation.count(index) > 0;
  if (name == "subject_type") return b.subject_type.count(index) > 0;
  if (name == "object_type") return b.object_type.count(index) > 0;
  if (name == "entity") return b.entity.count(index) > 0;
  return b.n.has_value();
}

std::optional<TypeId> BoundType(const Bindings& b, const std::string& key) {
  auto [name, index] = SplitKey(key);
  const auto& m = name == "subject_type" ? b.subject_type : b.object_type;
  auto it = m.find(index);
  if (it == m.end()) return std::nullopt;
  return it->second;
}

SyntaxNode SlotAtom(const KgStore& store, const Bindings& b, const SlotRef& r) {
  if (r.name == "relation") return RelationAtom(store, b.relation.at(r.index));
  if (r.name == "subject_type") return TypeAtom(store, b.subject_type.at(r.index));
  if (r.name == "object_type") return TypeAtom(store, b.object_type.at(r.index));
  if (r.name == "entity") return EntityAtom(store, b.entity.at(r.index));
  return SyntaxNode::Atom(std::to_string(*b.n));
}

SyntaxNode BindSchema(const KgStore& store, const Bindings& b, const SyntaxNode& node) {
  if (!node.is_call) {
    if (node.quoted) return node;
    const auto refs = FindMarkers(node.text);
    if (refs.empty()) return node;
    const std::string_view text = node.text;
    if (refs.size() != 1 || text.substr(0, kOpen.size()) != kOpen ||
        text.size() < kClose.size() ||
        text.substr(text.size() - kClose.size()) != kClose) {
      // A marker embedded in other text is not a slot reference.
      throw Error("template", "schema atom '" + node.text + "' mixes a slot with text");
    }
    return SlotAtom(store, b, refs[0]);
  }
  SyntaxNode out = node;
  for (SyntaxNode& a : out.args) a = BindSchema(store, b, a);
  return out;
}

}  // namespace

Bindings ResolveBindings(const KgStore& store, const QuestionTemplate& t,
                         const Bindings& bindings) {
  Bindings r = bindings;
  for (const auto& [key, label] : t.fixed) {
    auto [name, index] = SplitKey(key);
    if (name == "relation") {
      Merge(t, r.relation, index, store.relation(label), key);
    } else if (name == "subject_type") {
      Merge(t, r.subject_type, index, store.type(label), key);
    } else {
      Merge(t, r.object_type, index, store.type(label), key);
    }
  }
  for (const std::string& key : UsedSlots(t)) {
    if (!IsBound(r, key)) Fail(t.id, "slot " + MarkerText(key) + " is unbound");
  }
  for (const auto& [k, rel] : r.relation) store.CheckRelation(rel);
  for (const auto& [k, ty] : r.subject_type) store.CheckType(ty);
  for (const auto& [k, ty] : r.object_type) store.CheckType(ty);
  for (const auto& [k, e] : r.entity) store.CheckEntity(e);
  for (const auto& [k, slot] : t.entity_types) {
    auto e = r.entity.find(k);
    if (e == r.entity.end()) continue;
    const auto type = BoundType(r, slot);
    if (type && !store.has_type(e->second, *type)) {
      throw Error("type", t.id + ": " + store.label(e->second) + " is not a " +
                              store.label(*type));
    }
  }
  return r;
}

std::string RenderSurface(const KgStore& store, const QuestionTemplate& t,
                          const Bindings& b, size_t variant,
                          const std::map<int, std::string>& entity_text) {
  const std::string& text = t.surface[std::min(variant, t.surface.size() - 1)];
  std::string out;
  size_t last = 0;
  ScanMarkers(text, [&](const SlotRef& r, size_t begin, size_t end) {
    out.append(text, last, begin - last);
    if (r.name == "relation") {
      out += RelationWords(store.label(b.relation.at(r.index)));
    } else if (IsTypeSlot(r.name)) {
      const TypeId ty = *BoundType(b, r.Key());
      out += r.plural ? store.vocab().type_plural(ty) : store.label(ty);
    } else if (r.name == "entity") {
      auto it = entity_text.find(r.index);
      out += it != entity_text.end() ? it->second : store.label(b.entity.at(r.index));
    } else {
      out += std::to_string(*b.n);
    }
    last = end;
  });
  out.append(text, last, std::string::npos);
  return out;
}

QueryPlan BindPlan(const KgStore& store, const QuestionTemplate& t,
                   const Bindings& resolved) {
  return ResolvePlan(store, BindSchema(store, resolved, t.plan_schema));
}

std::variant<Instantiation, Rejection> Instantiate(const KgStore& store,
                                                   const QuestionTemplate& t,
                                                   const Bindings& bindings,
                                                   const InstantiateOptions& options) {
  Bindings resolved = ResolveBindings(store, t, bindings);
  QueryPlan plan = BindPlan(store, t, resolved);
  AnswerSet answer = Execute(store, plan, options.exec);
  if (const auto* e = std::get_if<EntityAnswer>(&answer)) {
    if (e->entities.empty()) return Rejection{"empty_answer"};
    if (e->entities.size() >= options.answer_cap) return Rejection{"answer_cap"};
  } else if (const auto* c = std::get_if<CountAnswer>(&answer)) {
    bool any = false;
    for (const CountEntry& entry : c->counts) any = any || entry.count > 0;
    if (!any) return Rejection{"empty_answer"};
  }
  std::string question = RenderSurface(store, t, resolved, options.variant);
  return Instantiation{t.id, std::move(resolved), std::move(question), std::move(plan),
                       std::move(answer)};
}

// --- Transforms ------------------------------------------------------------------

std::string_view LogicalOpWord(LogicalOp op) {
  switch (op) {
    case LogicalOp::kAnd: return "and";
    case LogicalOp::kOr: return "or";
    case LogicalOp::kButNot: return "but not";
  }
  return "";
}

namespace {

const char* SetHead(LogicalOp op) {
  switch (op) {
    case LogicalOp::kAnd: return "Intersection";
    case LogicalOp::kOr: return "Union";
    case LogicalOp::kButNot: return "Difference";
  }
  return "";
}

std::string_view OpSuffix(LogicalOp op) {
  switch (op) {
    case LogicalOp::kAnd: return "and";
    case LogicalOp::kOr: return "or";
    case LogicalOp::kButNot: return "butnot";
  }
  return "";
}

// Group(answer type, (relation, flipped direction, anchor type)).
SyntaxNode GroupOver(const QuestionTemplate& t, const SyntaxNode& lookup) {
  return SyntaxNode::Call(
      "Group", {lookup.args[3], SyntaxNode::Call("", {lookup.args[1],
                                                      FlipDirection(lookup.args[0]),
                                                      MarkerAtom(AnchorTypeSlot(t))})});
}

}  // namespace

QuestionTemplate TransformToCount(const QuestionTemplate& t) {
  const std::string& head = t.plan_schema.text;
  std::string new_head;
  if (head == "Retrieve") {
    new_head = "Count";
  } else if (head == "ThresholdFilter") {
    new_head = "CountOverThreshold";
  } else if (head == "Comparative") {
    new_head = "CountOverComparative";
  } else {
    Fail(t.id, "only Retrieve, ThresholdFilter and Comparative plans can be counted");
  }
  const std::string& plural = t.Plural();
  if (plural.rfind("Which ", 0) != 0) Fail(t.id, "count transform needs a 'Which' question");
  QuestionTemplate out = Derived(t, "count");
  out.surface = {"How many " + plural.substr(6)};
  out.plan_schema.text = new_head;
  return out;
}

QuestionTemplate TransformLogical(const QuestionTemplate& t, LogicalOp op) {
  const SyntaxNode& lookup = SimpleLookup(t);
  if (UsedSlots(t).count("entity:2")) Fail(t.id, "template already uses entity 2");
  SyntaxNode second = lookup;
  second.args[2] = MarkerAtom("entity:2");
  QuestionTemplate out = Derived(t, std::string(OpSuffix(op)));
  out.plan_schema = SyntaxNode::Call("Retrieve", {SyntaxNode::Call(SetHead(op), {lookup, second})});
  const std::string e1 = MarkerText("entity:1");
  out.surface = {ReplaceFirst(t.id, t.Plural(), e1,
                              e1 + " " + std::string(LogicalOpWord(op)) + " " +
                                  MarkerText("entity:2"))};
  out.entity_types[2] = t.entity_types.at(1);
  return out;
}

QuestionTemplate TransformMultiRelation(const QuestionTemplate& a,
                                        const QuestionTemplate& b, LogicalOp op) {
  const SyntaxNode& la = SimpleLookup(a);
  SimpleLookup(b);
  if (a.direction != b.direction) Fail(a.id, "templates must share a direction");
  const bool obj = a.direction == TemplateDirection::kObjectBased;
  const std::string answer = obj ? "object_type:1" : "subject_type:1";
  if (AnswerSlot(a, la) != answer) Fail(a.id, "unexpected answer slot");
  const std::map<std::string, std::string> renames = {
      {"relation:1", "relation:2"},
      {"entity:1", "entity:2"},
      {obj ? "subject_type:1" : "object_type:1", obj ? "subject_type:2" : "object_type:2"}};
  for (const std::string& key : UsedSlots(b)) {
    if (SplitKey(key).second != 1) Fail(b.id, "second template may only use index 1 slots");
  }
  const SyntaxNode lb = RenameSchema(SimpleLookup(b), renames);

  QuestionTemplate out = a;
  out.id = a.id + "+" + std::string(OpSuffix(op)) + "+" + b.id;
  out.paraphrase_group = a.paraphrase_group + "+" + std::string(OpSuffix(op)) + "+" +
                         b.paraphrase_group;
  out.plan_schema = SyntaxNode::Call("Retrieve", {SyntaxNode::Call(SetHead(op), {la, lb})});
  for (const auto& [key, label] : b.fixed) {
    auto it = renames.find(key);
    const std::string k = it == renames.end() ? key : it->second;
    auto [pos, inserted] = out.fixed.emplace(k, label);
    if (!inserted && pos->second != label) Fail(out.id, "fixed slots conflict");
  }
  for (const auto& [k, slot] : b.entity_types) {
    auto it = renames.find(slot);
    out.entity_types[k + 1] = it == renames.end() ? slot : it->second;
  }
  const std::string rest = AfterWhichType(b, RenameText(b.Plural(), renames));
  out.surface = {StripQuestionMark(a, a.Plural()) + " " + std::string(LogicalOpWord(op)) +
                 " " + rest};
  return out;
}

QuestionTemplate TransformArgOpt(const QuestionTemplate& t, Extremum extremum) {
  const SyntaxNode& lookup = SimpleLookup(t);
  AnswerSlot(t, lookup);
  const bool max = extremum == Extremum::kMax;
  QuestionTemplate out = Derived(t, max ? "argmax" : "argmin");
  out.plan_schema = SyntaxNode::Call(
      "ArgOpt", {GroupOver(t, lookup), SyntaxNode::Atom(max ? "max" : "min")});
  out.surface = {ReplaceFirst(t.id, t.Singular(), MarkerText("entity:1"),
                              std::string(max ? "maximum" : "minimum") + " number of " +
                                  MarkerText(AnchorTypeSlot(t), true))};
  out.entity_types.erase(1);
  return out;
}

QuestionTemplate TransformThreshold(const QuestionTemplate& t, Comparator comparator) {
  static const std::map<Comparator, std::pair<const char*, const char*>> kWords = {
      {Comparator::kAtLeast, {"at least", "atleast"}},
      {Comparator::kAtMost, {"at most", "atmost"}},
      {Comparator::kEqual, {"exactly", "equal"}},
      {Comparator::kApprox, {"approximately", "approx"}}};
  const SyntaxNode& lookup = SimpleLookup(t);
  AnswerSlot(t, lookup);
  const auto& [phrase, keyword] = kWords.at(comparator);
  QuestionTemplate out = Derived(t, keyword);
  out.plan_schema = SyntaxNode::Call(
      "ThresholdFilter",
      {GroupOver(t, lookup), SyntaxNode::Atom(keyword), MarkerAtom("n:1")});
  out.surface = {ReplaceFirst(t.id, t.Plural(), MarkerText("entity:1"),
                              std::string(phrase) + " " + MarkerText("n:1") + " " +
                                  MarkerText(AnchorTypeSlot(t), true))};
  out.entity_types.erase(1);
  return out;
}

QuestionTemplate TransformComparative(const QuestionTemplate& t, Comparison comparison) {
  const SyntaxNode& lookup = SimpleLookup(t);
  const std::string answer = AnswerSlot(t, lookup);
  const bool more = comparison == Comparison::kMore;
  QuestionTemplate out = Derived(t, more ? "more" : "less");
  out.plan_schema = SyntaxNode::Call(
      "Comparative", {GroupOver(t, lookup), MarkerAtom("entity:1"),
                      SyntaxNode::Atom(more ? "more" : "less")});
  out.surface = {ReplaceFirst(t.id, t.Plural(), MarkerText("entity:1"),
                              std::string(more ? "more" : "less") + " number of " +
                                  MarkerText(AnchorTypeSlot(t), true) + " than " +
                                  MarkerText("entity:1"))};
  out.entity_types[1] = answer;
  return out;
}

QuestionTemplate TransformVerify(const QuestionTemplate& t, int facts) {
  if (facts != 1 && facts != 2) Fail(t.id, "verification covers one or two facts");
  const SyntaxNode& lookup = SimpleLookup(t);
  const std::string answer = AnswerSlot(t, lookup);
  const bool obj = t.direction == TemplateDirection::kObjectBased;
  QuestionTemplate out = Derived(t, facts == 1 ? "verify" : "verify2");

  std::vector<SyntaxNode> fact_nodes;
  std::string listed = MarkerText("entity:2");
  for (int k = 2; k < 2 + facts; ++k) {
    const SyntaxNode e = MarkerAtom(KeyOf("entity", k));
    fact_nodes.push_back(SyntaxNode::Call(
        "", {lookup.args[1], obj ? lookup.args[2] : e, obj ? e : lookup.args[2]}));
    out.entity_types[k] = answer;
  }
  if (facts == 2) listed += " and " + MarkerText("entity:3");
  out.plan_schema = SyntaxNode::Call("Verify", std::move(fact_nodes));

  const std::string rest = AfterWhichType(t, t.Plural());
  if (obj) {
    out.surface = {std::string(facts == 1 ? "Does " : "Do ") + listed + " " + rest};
  } else {
    std::string body = StripQuestionMark(t, rest) + " " + listed + " ?";
    body[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(body[0])));
    out.surface = {body};
  }
  return out;
}

// --- Sampling --------------------------------------------------------------------

bool IsSimpleTemplate(const QuestionTemplate& t) {
  const SyntaxNode& p = t.plan_schema;
  return p.is_call && p.text == "Retrieve" && p.args.size() == 1 && p.args[0].is_call &&
         p.args[0].text == "Lookup" && p.args[0].args.size() == 4 &&
         AtomSlot(p.args[0].args[2]) == "entity:1" &&
         IsTypeSlot(SplitKey(AtomSlot(p.args[0].args[3])).first);
}

std::optional<Instantiation> SampleInstantiation(const KgStore& store,
                                                 const QuestionTemplate& t, Rng& rng,
                                                 const InstantiateOptions& options,
                                                 int attempts, const Bindings& preset) {
  if (store.tuples().empty()) return std::nullopt;
  std::vector<std::vector<const Tuple*>> by_relation(store.num_relations());
  for (const Tuple& tu : store.tuples()) by_relation[tu.relation.value()].push_back(&tu);
  std::vector<RelationId> live;
  for (uint32_t r = 0; r < store.num_relations(); ++r) {
    if (!by_relation[r].empty()) live.push_back(RelationId(r));
  }

  const std::set<std::string> used = UsedSlots(t);
  std::set<int> rel_indices, entity_indices;
  bool uses_n = false;
  for (const std::string& key : used) {
    auto [name, index] = SplitKey(key);
    if (name == "relation") rel_indices.insert(index);
    if (name == "entity") entity_indices.insert(index);
    if (name == "n") uses_n = true;
  }
  rel_indices.insert(1);
  const bool obj = t.direction == TemplateDirection::kObjectBased;
  auto anchor_of = [&](const Tuple& tu) { return obj ? tu.subject : tu.object; };
  auto slot_of = [&](int k) {
    auto it = t.entity_types.find(k);
    return it == t.entity_types.end() ? std::string("subject_type:1") : it->second;
  };

  // Fixed relations must agree with preset ones.
  for (const auto& [k, rel] : preset.relation) {
    auto fixed = t.fixed.find(KeyOf("relation", k));
    if (fixed != t.fixed.end() && store.relation(fixed->second) != rel) return std::nullopt;
  }
  // Relation index -> (subject side?, entity) required of its tuple.
  std::map<int, std::pair<bool, EntityId>> pinned;
  for (const auto& [k, e] : preset.entity) {
    if (!entity_indices.count(k)) continue;
    auto [name, j] = SplitKey(slot_of(k));
    if (!pinned.count(j)) pinned[j] = {name == "subject_type", e};
  }

  for (int attempt = 0; attempt < attempts; ++attempt) {
    Bindings b;
    std::map<int, const Tuple*> tuple_for;
    bool ok = true;
    for (int k : rel_indices) {
      RelationId rel;
      auto fixed = t.fixed.find(KeyOf("relation", k));
      if (fixed != t.fixed.end()) {
        rel = store.relation(fixed->second);
      } else if (preset.relation.count(k)) {
        rel = preset.relation.at(k);
      } else {
        rel = rng.Pick(live);
      }
      std::vector<const Tuple*> pool = by_relation[rel.value()];
      if (auto pin = pinned.find(k); pin != pinned.end()) {
        const auto [subject_side, e] = pin->second;
        std::erase_if(pool, [&](const Tuple* tu) {
          return (subject_side ? tu->subject : tu->object) != e;
        });
      }
      if (pool.empty()) {
        ok = false;
        break;
      }
      const Tuple* chosen = pool[rng.Below(pool.size())];
      if (k > 1 && !pinned.count(k) && rng.Bernoulli(0.7)) {
        std::vector<const Tuple*> sharing;
        for (const Tuple* tu : pool) {
          if (anchor_of(*tu) == anchor_of(*tuple_for.at(1))) sharing.push_back(tu);
        }
        if (!sharing.empty()) chosen = rng.Pick(sharing);
      }
      tuple_for[k] = chosen;
      if (used.count(KeyOf("relation", k))) b.relation[k] = rel;
    }
    if (!ok) continue;

    auto tuple_at = [&](int k) { return tuple_for.count(k) ? tuple_for[k] : tuple_for[1]; };
    for (const std::string& key : used) {
      auto [name, index] = SplitKey(key);
      if (!IsTypeSlot(name) || t.fixed.count(key)) continue;
      auto& target = name == "subject_type" ? b.subject_type : b.object_type;
      const auto& given = name == "subject_type" ? preset.subject_type : preset.object_type;
      if (auto it = given.find(index); it != given.end()) {
        target[index] = it->second;
        continue;
      }
      const Tuple* tu = tuple_at(index);
      const EntityId e = name == "subject_type" ? tu->subject : tu->object;
      const TypeSet& types = store.types_of(e);
      if (types.empty()) {
        ok = false;
        break;
      }
      target[index] = types[rng.Below(types.size())];
    }
    if (!ok) continue;

    // Fixed types are needed to pick typed entities below.
    Bindings typed = b;
    for (const auto& [key, label] : t.fixed) {
      auto [name, index] = SplitKey(key);
      if (name == "subject_type") typed.subject_type[index] = store.type(label);
      if (name == "object_type") typed.object_type[index] = store.type(label);
    }

    std::set<EntityId> taken;
    for (const auto& [k, e] : preset.entity) {
      if (entity_indices.count(k)) {
        b.entity[k] = e;
        taken.insert(e);
      }
    }
    for (int k : entity_indices) {
      if (b.entity.count(k)) continue;
      const std::string slot = slot_of(k);
      auto [name, j] = SplitKey(slot);
      const bool subject_side = name == "subject_type";
      const Tuple* base = tuple_at(j);
      EntityId pick = subject_side ? base->subject : base->object;
      if (k > 1 || taken.count(pick)) {
        const auto type = BoundType(typed, slot);
        const auto& pool = by_relation[base->relation.value()];
        std::vector<EntityId> options_any, options_near;
        const EntityId base_other = subject_side ? base->object : base->subject;
        for (const Tuple* tu : pool) {
          const EntityId e = subject_side ? tu->subject : tu->object;
          if (taken.count(e) || (type && !store.has_type(e, *type))) continue;
          options_any.push_back(e);
          if ((subject_side ? tu->object : tu->subject) == base_other) {
            options_near.push_back(e);
          }
        }
        if (!options_near.empty() && rng.Bernoulli(0.5)) {
          pick = rng.Pick(options_near);
        } else if (!options_any.empty()) {
          pick = rng.Pick(options_any);
        } else {
          ok = false;
          break;
        }
      }
      taken.insert(pick);
      b.entity[k] = pick;
    }
    if (!ok) continue;
    if (preset.n) {
      b.n = preset.n;
    } else if (uses_n) {
      b.n = 1 + rng.Below(4);
    }

    try {
      auto result = Instantiate(store, t, b, options);
      if (auto* inst = std::get_if<Instantiation>(&result)) return std::move(*inst);
    } catch (const Error& e) {
      if (e.kind() != "type") throw;
    }
  }
  return std::nullopt;
}

// --- Pathology filter -----------------------------------------------------------

PathologyConfig LoadPathologyConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  PathologyConfig c;
  try {
    Json j = Json::parse(in);
    if (j.contains("generic_relations")) {
      c.generic_relations = j.at("generic_relations").get<std::set<std::string>>();
    }
    if (j.contains("peer_blocklist")) {
      c.peer_blocklist.clear();
      for (const auto& pair : j.at("peer_blocklist")) {
        c.peer_blocklist.emplace_back(pair.at(0).get<std::string>(),
                                      pair.at(1).get<std::string>());
      }
    }
  } catch (const Json::exception& e) {
    throw Error("parse", path.filename().string() + ": " + e.what());
  }
  return c;
}

PathologyVerdict PathologyFilter(const KgStore& store, const Instantiation& inst,
                                 const PathologyConfig& config) {
  std::set<std::string> type_labels;
  for (const auto& [k, ty] : inst.bindings.subject_type) type_labels.insert(Lower(store.label(ty)));
  for (const auto& [k, ty] : inst.bindings.object_type) type_labels.insert(Lower(store.label(ty)));

  for (const auto& [k, rel] : inst.bindings.relation) {
    const std::string& raw = store.label(rel);
    if (config.generic_relations.count(raw) ||
        config.generic_relations.count(RelationWords(raw))) {
      return {false, "generic_relation"};
    }
    const std::string words = " " + Lower(RelationWords(raw)) + " ";
    for (const std::string& type : type_labels) {
      if (words.find(" " + type + " ") != std::string::npos) return {false, "label_overlap"};
    }
  }
  // Peer pairs also consider the types of the bound entities.
  std::set<std::string> involved = type_labels;
  for (const auto& [k, e] : inst.bindings.entity) {
    for (TypeId ty : store.types_of(e)) involved.insert(Lower(store.label(ty)));
  }
  for (const auto& [a, b] : config.peer_blocklist) {
    if (involved.count(Lower(a)) && involved.count(Lower(b))) {
      return {false, "peer_block"};
    }
  }
  return {};
}

}  // namespace convqa
