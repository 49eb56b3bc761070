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

#include "convqa/eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace convqa {
namespace {

using nlohmann::json;

double Ratio(double num, double den) { return den == 0 ? 0 : num / den; }

double Harmonic(double p, double r) { return p + r == 0 ? 0 : 2 * p * r / (p + r); }

// Sum in a canonical order so results do not depend on record order.
double SortedSum(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  double s = 0;
  for (double x : xs) s += x;
  return s;
}

double Mean(std::vector<double> xs) {
  const auto n = static_cast<double>(xs.size());
  return xs.empty() ? 0 : SortedSum(std::move(xs)) / n;
}

using NgramCounts = std::map<std::vector<std::string>, uint64_t>;

NgramCounts Ngrams(const std::vector<std::string>& tokens, size_t n) {
  NgramCounts out;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

struct BleuStats {
  std::vector<uint64_t> matched, total;
  uint64_t candidate_length = 0, reference_length = 0;
};

void Accumulate(BleuStats& s, const std::vector<std::string>& ref,
                const std::vector<std::string>& cand, int max_order) {
  s.matched.resize(static_cast<size_t>(max_order));
  s.total.resize(static_cast<size_t>(max_order));
  for (int n = 1; n <= max_order; ++n) {
    const NgramCounts r = Ngrams(ref, static_cast<size_t>(n));
    for (const auto& [gram, c] : Ngrams(cand, static_cast<size_t>(n))) {
      const auto it = r.find(gram);
      s.matched[static_cast<size_t>(n - 1)] += std::min(c, it == r.end() ? 0 : it->second);
      s.total[static_cast<size_t>(n - 1)] += c;
    }
  }
  s.candidate_length += cand.size();
  s.reference_length += ref.size();
}

double Score(const BleuStats& s, const BleuOptions& o) {
  if (s.candidate_length == 0) return 0;
  // Orders longer than the candidate have no n-grams and are left out.
  double log_sum = 0;
  int orders = 0;
  for (size_t n = 0; n < s.matched.size(); ++n) {
    double m = static_cast<double>(s.matched[n]);
    const double t = static_cast<double>(s.total[n]);
    if (t == 0) continue;
    if (m == 0) {
      if (o.epsilon <= 0) return 0;
      m = o.epsilon;
    }
    log_sum += std::log(m / t);
    ++orders;
  }
  const double c = static_cast<double>(s.candidate_length);
  const double r = static_cast<double>(s.reference_length);
  const double bp = c > r ? 1.0 : std::exp(1 - r / c);
  return bp * std::exp(log_sum / orders);
}

RecordKind ParseKind(const std::string& name) {
  for (RecordKind k : {RecordKind::kEntities, RecordKind::kBoolean, RecordKind::kCount,
                       RecordKind::kUtterance}) {
    if (RecordKindName(k) == name) return k;
  }
  throw Error("parse", "unknown record kind '" + name + "'");
}

std::vector<int64_t> Values(const json& j, RecordKind kind) {
  std::vector<int64_t> out;
  for (const json& v : j) {
    if (kind == RecordKind::kBoolean) {
      out.push_back(v.get<bool>() ? 1 : 0);
    } else {
      out.push_back(v.get<int64_t>());
    }
  }
  return out;
}

json ValuesJson(const std::vector<int64_t>& values, RecordKind kind) {
  json out = json::array();
  for (int64_t v : values) {
    if (kind == RecordKind::kBoolean) {
      out.push_back(v != 0);
    } else {
      out.push_back(v);
    }
  }
  return out;
}

json RefJson(const std::optional<ReferenceValues>& r) {
  if (!r) return nullptr;
  json out = json::object();
  if (r->recall) out["recall"] = *r->recall;
  if (r->precision) out["precision"] = *r->precision;
  if (r->f1) out["f1"] = *r->f1;
  if (r->bleu) out["bleu"] = *r->bleu;
  return out;
}

ReportRow EntityRow(const std::string& label, const std::vector<const EvalRecord*>& rs) {
  ReportRow row;
  row.type = label;
  row.count = rs.size();
  std::vector<double> ps, rcs, fs;
  uint64_t hit = 0, gold = 0, pred = 0;
  for (const EvalRecord* r : rs) {
    const PrecisionRecall pr = EntityPrecisionRecall(r->gold_entities, r->predicted_entities);
    ps.push_back(pr.precision);
    rcs.push_back(pr.recall);
    fs.push_back(Harmonic(pr.precision, pr.recall));
    const std::set<std::string> g(r->gold_entities.begin(), r->gold_entities.end());
    const std::set<std::string> p(r->predicted_entities.begin(), r->predicted_entities.end());
    for (const std::string& e : p) hit += g.count(e);
    gold += g.size();
    pred += p.size();
  }
  row.macro_precision = Mean(ps);
  row.macro_recall = Mean(rcs);
  row.macro_f1 = Mean(fs);
  row.micro_precision = pred == 0 ? (gold == 0 ? 1 : 0) : Ratio(double(hit), double(pred));
  row.micro_recall = gold == 0 ? (pred == 0 ? 1 : 0) : Ratio(double(hit), double(gold));
  row.micro_f1 = Harmonic(row.micro_precision, row.micro_recall);
  return row;
}

}  // namespace

PrecisionRecall EntityPrecisionRecall(const std::vector<std::string>& gold,
                                      const std::vector<std::string>& predicted) {
  const std::set<std::string> g(gold.begin(), gold.end());
  const std::set<std::string> p(predicted.begin(), predicted.end());
  if (g.empty() && p.empty()) return {1, 1};
  size_t hit = 0;
  for (const std::string& e : p) hit += g.count(e);
  return {p.empty() ? 0 : double(hit) / double(p.size()),
          g.empty() ? 0 : double(hit) / double(g.size())};
}

SequenceCounts PositionalMatches(const std::vector<int64_t>& gold,
                                 const std::vector<int64_t>& predicted) {
  SequenceCounts c{0, gold.size(), predicted.size()};
  for (size_t i = 0; i < std::min(gold.size(), predicted.size()); ++i) {
    c.matched += gold[i] == predicted[i];
  }
  return c;
}

double PositionalF1(
    const std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>>& pairs) {
  uint64_t m = 0, g = 0, p = 0;
  for (const auto& [gold, pred] : pairs) {
    const SequenceCounts c = PositionalMatches(gold, pred);
    m += c.matched;
    g += c.gold;
    p += c.predicted;
  }
  return Harmonic(Ratio(double(m), double(p)), Ratio(double(m), double(g)));
}

std::vector<std::string> Tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

double Bleu(const std::string& reference, const std::string& candidate,
            const BleuOptions& options) {
  return CorpusBleu({{reference, candidate}}, options);
}

double CorpusBleu(const std::vector<std::pair<std::string, std::string>>& pairs,
                  const BleuOptions& options) {
  if (options.max_order < 1) throw Error("range", "BLEU order must be positive");
  BleuStats s;
  for (const auto& [ref, cand] : pairs) Accumulate(s, Tokenize(ref), Tokenize(cand), options.max_order);
  return Score(s, options);
}

std::string_view RecordKindName(RecordKind kind) {
  switch (kind) {
    case RecordKind::kEntities: return "entities";
    case RecordKind::kBoolean: return "boolean";
    case RecordKind::kCount: return "count";
    case RecordKind::kUtterance: return "utterance";
  }
  return "?";
}

std::vector<EvalRecord> ParseEvalRecords(const std::string& jsonl) {
  std::vector<EvalRecord> out;
  std::istringstream in(jsonl);
  size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      EvalRecord r;
      r.type = j.at("type").get<std::string>();
      r.kind = ParseKind(j.at("kind").get<std::string>());
      const json& g = j.at("gold");
      const json& p = j.at("predicted");
      switch (r.kind) {
        case RecordKind::kEntities:
          r.gold_entities = g.get<std::vector<std::string>>();
          r.predicted_entities = p.get<std::vector<std::string>>();
          break;
        case RecordKind::kBoolean:
        case RecordKind::kCount:
          r.gold_values = Values(g, r.kind);
          r.predicted_values = Values(p, r.kind);
          break;
        case RecordKind::kUtterance:
          r.gold_text = g.get<std::string>();
          r.predicted_text = p.get<std::string>();
          break;
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error("parse", "record line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("parse", "record line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalRecord> ReadEvalRecords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseEvalRecords(buf.str());
}

std::string EvalRecordToJson(const EvalRecord& r) {
  json j;
  j["type"] = r.type;
  j["kind"] = RecordKindName(r.kind);
  switch (r.kind) {
    case RecordKind::kEntities:
      j["gold"] = r.gold_entities;
      j["predicted"] = r.predicted_entities;
      break;
    case RecordKind::kBoolean:
    case RecordKind::kCount:
      j["gold"] = ValuesJson(r.gold_values, r.kind);
      j["predicted"] = ValuesJson(r.predicted_values, r.kind);
      break;
    case RecordKind::kUtterance:
      j["gold"] = r.gold_text;
      j["predicted"] = r.predicted_text;
      break;
  }
  return j.dump();
}

std::string QuestionTypeLabel(TurnState state, const AnswerSet& answer) {
  if (std::holds_alternative<BooleanAnswer>(answer)) return "Verification (Boolean) (All)";
  const bool comparative =
      state == TurnState::kComparativeQ || state == TurnState::kComparativeCountQ;
  if (std::holds_alternative<CountAnswer>(answer)) {
    return comparative ? "Comparative Reasoning (Count) (All)"
                       : "Quantitative Reasoning (Count) (All)";
  }
  switch (state) {
    case TurnState::kSimpleQ: return "Simple Question (Direct)";
    case TurnState::kCoreferenceQ: return "Simple Question (Coreferenced)";
    case TurnState::kEllipsisQ: return "Simple Question (Ellipsis)";
    case TurnState::kLogicalQ: return "Logical Reasoning (All)";
    case TurnState::kQuantitativeCountQ:
    case TurnState::kQuantitativeArgOptQ:
    case TurnState::kQuantitativeThresholdQ: return "Quantitative Reasoning (All)";
    case TurnState::kComparativeQ:
    case TurnState::kComparativeCountQ: return "Comparative Reasoning (All)";
    case TurnState::kClarificationA: return "Clarification";
    default: return "";
  }
}

std::string ClarificationGenerationLabel() { return "Clarification (Natural Language Generation)"; }

std::vector<EvalRecord> GoldRecords(const KgStore& store, const std::vector<Dialog>& dialogs,
                                    const ExecOptions& exec) {
  std::vector<EvalRecord> out;
  for (const Dialog& d : dialogs) {
    for (size_t i = 0; i < d.turns.size(); ++i) {
      const DialogTurn& t = d.turns[i];
      if (t.state == TurnState::kClarificationQ) {
        EvalRecord r;
        r.type = ClarificationGenerationLabel();
        r.kind = RecordKind::kUtterance;
        r.gold_text = t.utterance;
        out.push_back(std::move(r));
        continue;
      }
      if (t.speaker != Speaker::kUser || !t.plan) continue;
      const bool clarified =
          i + 1 < d.turns.size() && d.turns[i + 1].state == TurnState::kClarificationQ;
      if (clarified) continue;
      const AnswerSet answer = Execute(store, *t.plan, exec);
      EvalRecord r;
      r.type = QuestionTypeLabel(t.state, answer);
      if (r.type.empty()) continue;
      if (const auto* e = std::get_if<EntityAnswer>(&answer)) {
        r.kind = RecordKind::kEntities;
        for (EntityId id : e->entities.ids()) {
          r.gold_entities.push_back(store.vocab().entity(id).external_id);
        }
      } else if (const auto* c = std::get_if<CountAnswer>(&answer)) {
        r.kind = RecordKind::kCount;
        for (const CountEntry& ce : c->counts) r.gold_values.push_back(int64_t(ce.count));
      } else {
        r.kind = RecordKind::kBoolean;
        for (bool b : std::get<BooleanAnswer>(answer).values) r.gold_values.push_back(b);
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::optional<ReferenceValues> PublishedReference(const std::string& label) {
  static const std::map<std::string, ReferenceValues> kTable = {
      {kOverallLabel, {15.83, 6.7, {}, {}}},
      {"Simple Question (Direct)", {27.9, 7.77, {}, {}}},
      {"Simple Question (Coreferenced)", {12.31, 3.84, {}, {}}},
      {"Simple Question (Ellipsis)", {19.45, 3.96, {}, {}}},
      {"Logical Reasoning (All)", {27.22, 10.52, {}, {}}},
      {"Quantitative Reasoning (All)", {0.29, 0.44, {}, {}}},
      {"Comparative Reasoning (All)", {1.26, 5.45, {}, {}}},
      {"Clarification", {30.64, 10.8, {}, {}}},
      {"Verification (Boolean) (All)", {{}, {}, 17.68, {}}},
      {"Quantitative Reasoning (Count) (All)", {{}, {}, 40.2, {}}},
      {"Comparative Reasoning (Count) (All)", {{}, {}, 11.86, {}}},
      {"Clarification (Natural Language Generation)", {{}, {}, {}, 15.58}},
  };
  const auto it = kTable.find(label);
  if (it == kTable.end()) return std::nullopt;
  return it->second;
}

Report Aggregate(const std::vector<EvalRecord>& records) {
  std::map<std::string, std::vector<const EvalRecord*>> groups;
  std::vector<const EvalRecord*> entity_records;
  for (const EvalRecord& r : records) {
    groups[r.type].push_back(&r);
    if (r.kind == RecordKind::kEntities) entity_records.push_back(&r);
  }
  Report report;
  if (!entity_records.empty()) report.rows.push_back(EntityRow(kOverallLabel, entity_records));
  for (const auto& [label, rs] : groups) {
    const RecordKind kind = rs.front()->kind;
    for (const EvalRecord* r : rs) {
      if (r->kind != kind) throw Error("type", "mixed record kinds under '" + label + "'");
    }
    if (kind == RecordKind::kEntities) {
      report.rows.push_back(EntityRow(label, rs));
      continue;
    }
    ReportRow row;
    row.type = label;
    row.kind = kind;
    row.count = rs.size();
    if (kind == RecordKind::kUtterance) {
      std::vector<std::pair<std::string, std::string>> pairs;
      std::vector<double> sentence;
      for (const EvalRecord* r : rs) {
        pairs.emplace_back(r->gold_text, r->predicted_text);
        sentence.push_back(Bleu(r->gold_text, r->predicted_text, {kBleuEpsilon}));
      }
      std::sort(pairs.begin(), pairs.end());
      row.bleu = CorpusBleu(pairs, {kBleuEpsilon});
      row.mean_sentence_bleu = Mean(sentence);
    } else {
      std::vector<std::pair<std::vector<int64_t>, std::vector<int64_t>>> pairs;
      uint64_t exact = 0;
      for (const EvalRecord* r : rs) {
        pairs.emplace_back(r->gold_values, r->predicted_values);
        exact += r->gold_values == r->predicted_values;
      }
      row.f1 = PositionalF1(pairs);
      row.accuracy = double(exact) / double(rs.size());
    }
    report.rows.push_back(std::move(row));
  }
  for (ReportRow& row : report.rows) row.reference = PublishedReference(row.type);
  return report;
}

std::string ReportToJson(const Report& report, const std::string& config_json) {
  json j;
  j["metric_notes"] = {
      {"entities", "per-question set precision/recall; macro averages per question (default), "
                   "micro pools intersections; both empty counts as 1/1"},
      {"boolean_count", "f1 is micro F1 over positionally aligned answer elements; accuracy is "
                        "exact sequence match"},
      {"utterance", "BLEU-4 over whitespace tokens with counts pooled over the row and 1e-9 "
                    "added to zero n-gram matches"},
      {"reference", "published numbers in percent, shown for context only"},
  };
  j["averaging"] = "macro";
  json rows = json::array();
  for (const ReportRow& r : report.rows) {
    json row{{"type", r.type}, {"kind", RecordKindName(r.kind)}, {"count", r.count}};
    switch (r.kind) {
      case RecordKind::kEntities:
        row["precision"] = r.macro_precision;
        row["recall"] = r.macro_recall;
        row["f1"] = r.macro_f1;
        row["micro"] = {{"precision", r.micro_precision},
                        {"recall", r.micro_recall},
                        {"f1", r.micro_f1}};
        break;
      case RecordKind::kBoolean:
      case RecordKind::kCount:
        row["f1"] = r.f1;
        row["accuracy"] = r.accuracy;
        break;
      case RecordKind::kUtterance:
        row["bleu4"] = r.bleu;
        row["mean_sentence_bleu4"] = r.mean_sentence_bleu;
        break;
    }
    row["reference"] = RefJson(r.reference);
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  j["config"] = json::parse(config_json);
  return j.dump(2) + "\n";
}

std::string ReportToTable(const Report& report) {
  std::vector<std::vector<std::string>> cells = {
      {"question type", "n", "metric", "value", "micro", "published %"}};
  auto pct = [](double x) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(2);
    o << 100 * x;
    return o.str();
  };
  auto ref = [](std::optional<double> v) {
    if (!v) return std::string("-");
    std::ostringstream o;
    o << *v;
    return o.str();
  };
  for (const ReportRow& r : report.rows) {
    const std::string n = std::to_string(r.count);
    const ReferenceValues rv = r.reference.value_or(ReferenceValues{});
    switch (r.kind) {
      case RecordKind::kEntities:
        cells.push_back({r.type, n, "recall", pct(r.macro_recall), pct(r.micro_recall), ref(rv.recall)});
        cells.push_back({"", "", "precision", pct(r.macro_precision), pct(r.micro_precision),
                         ref(rv.precision)});
        break;
      case RecordKind::kBoolean:
      case RecordKind::kCount:
        cells.push_back({r.type, n, "f1", pct(r.f1), "-", ref(rv.f1)});
        cells.push_back({"", "", "accuracy", pct(r.accuracy), "-", "-"});
        break;
      case RecordKind::kUtterance:
        cells.push_back({r.type, n, "bleu4", pct(r.bleu), "-", ref(rv.bleu)});
        break;
    }
  }
  std::vector<size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - row[c].size(), ' ');
      out << (c == 0 ? row[c] + pad : "  " + pad + row[c]);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace convqa
