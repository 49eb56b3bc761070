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

#include "convqa/entity_linker.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <span>
#include <unordered_set>

#include "convqa/query_algebra.h"
#include "json.hpp"

namespace convqa {
namespace {

std::vector<std::string_view> Tokens(std::string_view normalized) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (start < normalized.size()) {
    size_t space = normalized.find(' ', start);
    if (space == std::string_view::npos) space = normalized.size();
    out.push_back(normalized.substr(start, space - start));
    start = space + 1;
  }
  return out;
}

std::string Join(const std::vector<std::string_view>& tokens, size_t begin, size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) {
    if (i > begin) out += ' ';
    out += tokens[i];
  }
  return out;
}

struct RecallSums {
  RecallRow row;
  double tuple_recall = 0, full = 0, entity_recall = 0, candidates = 0;
  size_t entity_scored = 0;

  void Add(double recall, bool has_gold, double entity_recall_value, bool has_entities,
           const CandidateSet& c) {
    ++row.questions;
    row.truncated += c.truncated ? 1 : 0;
    candidates += static_cast<double>(c.tuples.size());
    if (has_gold) {
      ++row.scored;
      tuple_recall += recall;
      full += recall == 1.0 ? 1 : 0;
    }
    if (has_entities) {
      ++entity_scored;
      entity_recall += entity_recall_value;
    }
  }

  RecallRow Finish() const {
    RecallRow out = row;
    if (row.scored > 0) {
      out.mean_tuple_recall = tuple_recall / static_cast<double>(row.scored);
      out.full_recall_fraction = full / static_cast<double>(row.scored);
    }
    if (entity_scored > 0) out.mean_entity_recall = entity_recall / static_cast<double>(entity_scored);
    if (row.questions > 0) out.mean_candidates = candidates / static_cast<double>(row.questions);
    return out;
  }
};

nlohmann::ordered_json RowJson(const RecallRow& r) {
  return {{"questions", r.questions},
          {"scored", r.scored},
          {"mean_tuple_recall", r.mean_tuple_recall},
          {"full_recall_fraction", r.full_recall_fraction},
          {"mean_entity_recall", r.mean_entity_recall},
          {"truncated", r.truncated},
          {"mean_candidates", r.mean_candidates}};
}

}  // namespace

std::string NormalizeText(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    const bool space = c < 0x80 && (std::isspace(c) || std::ispunct(c));
    if (space) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c < 0x80 ? static_cast<char>(std::tolower(c)) : ch;
  }
  return out;
}

Gazetteer Gazetteer::Build(const KgStore& store) {
  Gazetteer g;
  for (uint32_t i = 0; i < store.num_entities(); ++i) {
    g.AddAlias(EntityId(i), store.label(EntityId(i)));
  }
  return g;
}

void Gazetteer::AddAlias(EntityId entity, std::string_view alias) {
  std::string key = NormalizeText(alias);
  if (key.empty()) return;
  max_ngram_ = std::max(max_ngram_, Tokens(key).size());
  EntitySet& set = entries_[std::move(key)];
  if (!set.contains(entity)) {
    std::vector<EntityId> ids = set.ids();
    ids.push_back(entity);
    set = EntitySet::FromUnsorted(std::move(ids));
  }
}

void Gazetteer::LoadAliases(const std::filesystem::path& path, const KgStore& store) {
  std::ifstream in(path);
  if (!in) throw Error("load", "cannot open " + path.string());
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t tab = line.find('\t');
    const std::string where = path.filename().string() + ":" + std::to_string(line_no);
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error("load", where + ": expected entity_id<TAB>alias");
    }
    const auto id = store.vocab().EntityByExternalId(std::string_view(line).substr(0, tab));
    if (!id) throw Error("load", where + ": unknown entity " + line.substr(0, tab));
    AddAlias(*id, std::string_view(line).substr(tab + 1));
  }
}

const EntitySet* Gazetteer::Find(std::string_view normalized) const {
  auto it = entries_.find(std::string(normalized));
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<Mention> Link(const Gazetteer& gazetteer, std::string_view utterance) {
  const std::string normalized = NormalizeText(utterance);
  const std::vector<std::string_view> tokens = Tokens(normalized);
  std::vector<Mention> out;
  size_t i = 0;
  while (i < tokens.size()) {
    bool matched = false;
    const size_t longest = std::min(gazetteer.max_ngram(), tokens.size() - i);
    for (size_t n = longest; n >= 1; --n) {
      std::string key = Join(tokens, i, i + n);
      if (const EntitySet* hit = gazetteer.Find(key)) {
        out.push_back(Mention{i, i + n, std::move(key), *hit});
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) ++i;
  }
  return out;
}

std::vector<EntityId> MatchedEntities(const std::vector<Mention>& mentions) {
  std::vector<EntityId> out;
  std::unordered_set<EntityId> seen;
  for (const Mention& m : mentions) {
    for (EntityId e : m.entities) {
      if (seen.insert(e).second) out.push_back(e);
    }
  }
  return out;
}

CandidateSet CandidateTuples(const KgStore& store, const std::vector<EntityId>& matched,
                             size_t cap) {
  if (cap == 0) throw Error("range", "candidate cap must be at least 1");
  CandidateSet out;
  std::vector<EntityId> order;
  for (EntityId e : matched) {
    store.CheckEntity(e);
    if (std::find(order.begin(), order.end(), e) == order.end()) order.push_back(e);
  }
  out.matched = order;
  std::stable_sort(order.begin(), order.end(), [&](EntityId a, EntityId b) {
    const size_t fa = store.fanout(a), fb = store.fanout(b);
    return fa != fb ? fa < fb : a < b;
  });

  const auto& tuples = store.tuples();
  std::vector<std::span<const uint32_t>> lists;
  for (EntityId e : order) lists.push_back(store.tuple_indices_containing(e));
  std::vector<size_t> next(lists.size(), 0);
  std::unordered_set<uint32_t> taken;
  bool remaining = true;
  while (remaining) {
    remaining = false;
    for (size_t k = 0; k < lists.size(); ++k) {
      while (next[k] < lists[k].size() && taken.count(lists[k][next[k]])) ++next[k];
      if (next[k] == lists[k].size()) continue;
      if (out.tuples.size() == cap) {
        out.truncated = true;
        return out;
      }
      const uint32_t idx = lists[k][next[k]++];
      taken.insert(idx);
      out.tuples.push_back(tuples[idx]);
      remaining = true;
    }
  }
  return out;
}

RecallReport LinkerRecall(const KgStore& store, const Gazetteer& gazetteer,
                          const std::vector<Dialog>& dialogs, const LinkOptions& options) {
  RecallSums overall;
  std::map<std::string, RecallSums> by_state;
  for (const Dialog& d : dialogs) {
    for (size_t i = 0; i < d.turns.size(); ++i) {
      const DialogTurn& turn = d.turns[i];
      if (turn.speaker != Speaker::kUser || !turn.plan) continue;
      // The question utterance; a clarification answer carries the plan of
      // the question asked before it.
      size_t q = i;
      if (turn.state == TurnState::kClarificationA) {
        while (q > 0 && d.turns[q].state != TurnState::kCoreferenceQ) --q;
      }
      std::vector<EntityId> matched = MatchedEntities(Link(gazetteer, d.turns[q].utterance));
      if (turn.state == TurnState::kClarificationA) {
        for (EntityId e : MatchedEntities(Link(gazetteer, turn.utterance))) matched.push_back(e);
      }
      if (options.use_context) {
        // Previous pair: the last system turn before q and the user turn before it.
        size_t found = 0;
        for (size_t k = q; k > 0 && found < 2; --k) {
          const DialogTurn& prev = d.turns[k - 1];
          if ((found == 0 && prev.speaker == Speaker::kSystem) ||
              (found == 1 && prev.speaker == Speaker::kUser)) {
            matched.insert(matched.end(), prev.entities.begin(), prev.entities.end());
            ++found;
          }
        }
      }
      const CandidateSet c = CandidateTuples(store, matched, options.cap);
      const std::vector<Tuple> gold = SupportingTuples(store, *turn.plan);
      std::set<Tuple> have(c.tuples.begin(), c.tuples.end());
      size_t hit = 0;
      for (const Tuple& t : gold) hit += have.count(t);
      const double recall =
          gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
      const PlanMentions mentions = MentionsOf(*turn.plan);
      std::set<EntityId> matched_set(c.matched.begin(), c.matched.end());
      size_t entity_hits = 0;
      for (EntityId e : mentions.entities) entity_hits += matched_set.count(e);
      const double entity_recall =
          mentions.entities.empty()
              ? 0.0
              : static_cast<double>(entity_hits) / static_cast<double>(mentions.entities.size());
      overall.Add(recall, !gold.empty(), entity_recall, !mentions.entities.empty(), c);
      by_state[std::string(TurnStateName(d.turns[q].state))].Add(
          recall, !gold.empty(), entity_recall, !mentions.entities.empty(), c);
    }
  }
  RecallReport report;
  report.overall = overall.Finish();
  for (const auto& [k, v] : by_state) report.by_state[k] = v.Finish();
  return report;
}

std::string RecallReportToJson(const RecallReport& report) {
  nlohmann::ordered_json j;
  j["overall"] = RowJson(report.overall);
  nlohmann::ordered_json states = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.by_state) states[k] = RowJson(v);
  j["by_state"] = states;
  return j.dump(2);
}

}  // namespace convqa
