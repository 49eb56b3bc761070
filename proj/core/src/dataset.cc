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

#include "convqa/dataset.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "json.hpp"

namespace convqa {
namespace {

using Json = nlohmann::json;

uint64_t Fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

SplitPart PartOf(uint64_t hash, const SplitSpec& spec) {
  const double u = static_cast<double>(hash >> 11) * 0x1.0p-53;
  if (u < spec.train) return SplitPart::kTrain;
  if (u < spec.train + spec.valid) return SplitPart::kValid;
  return SplitPart::kTest;
}

void CheckSpec(const SplitSpec& spec) {
  const double sum = spec.train + spec.valid + spec.test;
  if (spec.train < 0 || spec.valid < 0 || spec.test < 0 || std::abs(sum - 1.0) > 1e-9) {
    throw Error("range", "split fractions must be non-negative and sum to 1");
  }
}

size_t Words(const std::string& s) {
  std::istringstream in(s);
  size_t n = 0;
  std::string w;
  while (in >> w) ++n;
  return n;
}

Json StatsJson(const CorpusStats& s) {
  return Json{{"dialogs", s.dialogs},
              {"utterances", s.utterances},
              {"qa_utterances", s.qa_utterances},
              {"avg_utterances", s.avg_utterances},
              {"avg_question_words", s.avg_question_words},
              {"avg_response_words", s.avg_response_words},
              {"avg_states", s.avg_states},
              {"vocab_size", s.vocab_size},
              {"vocab_threshold", s.vocab_threshold},
              {"state_counts", s.state_counts}};
}

}  // namespace

std::vector<Tuple> DialogProvenance(const KgStore& store, const Dialog& dialog) {
  std::vector<Tuple> out;
  for (const DialogTurn& t : dialog.turns) {
    if (!t.plan) continue;
    for (const Tuple& tu : SupportingTuples(store, *t.plan)) out.push_back(tu);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Corpus GenerateCorpus(const KgStore& store, const DialogGenerator& generator,
                      size_t num_dialogs, uint64_t seed, size_t threads,
                      const std::optional<SplitSpec>& split_aware) {
  if (split_aware) CheckSpec(*split_aware);
  std::vector<std::optional<Dialog>> slots(num_dialogs);
  std::vector<std::vector<Tuple>> provenance(num_dialogs);
  auto work = [&](size_t begin, size_t step) {
    for (size_t i = begin; i < num_dialogs; i += step) {
      try {
        std::string id = "dialog-" + std::to_string(i);
        PlanFilter accept;
        if (split_aware) {
          const SplitSpec& spec = *split_aware;
          const SplitPart target = DialogIdPart(id, spec);
          accept = [&store, &spec, target](const QueryPlan& plan) {
            for (const Tuple& t : SupportingTuples(store, plan)) {
              if (TuplePart(t, spec) != target) return false;
            }
            return true;
          };
        }
        slots[i] = generator.Generate(std::move(id), DeriveSeed(seed, i), accept);
        provenance[i] = DialogProvenance(store, *slots[i]);
      } catch (const Error& e) {
        if (e.kind() != "dialog") throw;
      }
    }
  };
  threads = std::max<size_t>(1, std::min(threads, num_dialogs));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t, threads);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  Corpus corpus;
  for (size_t i = 0; i < num_dialogs; ++i) {
    if (!slots[i]) {
      ++corpus.failed;
      continue;
    }
    corpus.dialogs.push_back(std::move(*slots[i]));
    corpus.provenance.push_back(std::move(provenance[i]));
  }
  return corpus;
}

SplitPart TuplePart(const Tuple& tuple, const SplitSpec& spec) {
  return PartOf(Mix64(TupleKey(tuple) ^ Mix64(spec.seed)), spec);
}

SplitPart DialogIdPart(const std::string& dialog_id, const SplitSpec& spec) {
  return PartOf(Mix64(Fnv1a(dialog_id) ^ Mix64(spec.seed)), spec);
}

CorpusSplit SplitCorpus(const Corpus& corpus, const SplitSpec& spec) {
  CheckSpec(spec);
  if (corpus.provenance.size() != corpus.dialogs.size()) {
    throw Error("range", "corpus provenance does not match its dialogs");
  }
  CorpusSplit split;
  std::vector<size_t>* parts[] = {&split.train, &split.valid, &split.test};
  for (size_t i = 0; i < corpus.dialogs.size(); ++i) {
    const auto& tuples = corpus.provenance[i];
    std::optional<SplitPart> part;
    bool straddles = false;
    for (const Tuple& t : tuples) {
      const SplitPart p = TuplePart(t, spec);
      if (part && *part != p) {
        straddles = true;
        break;
      }
      part = p;
    }
    if (straddles) {
      split.discarded.push_back(i);
      continue;
    }
    if (!part) part = DialogIdPart(corpus.dialogs[i].id, spec);
    parts[static_cast<int>(*part)]->push_back(i);
  }
  return split;
}

bool IsQuestionState(TurnState state) {
  return static_cast<int>(state) <= static_cast<int>(TurnState::kBooleanQ);
}

CorpusStats ComputeStats(const std::vector<const Dialog*>& dialogs, size_t vocab_threshold) {
  CorpusStats s;
  s.vocab_threshold = vocab_threshold;
  s.dialogs = dialogs.size();
  size_t questions = 0, question_words = 0, responses = 0, response_words = 0, states = 0;
  std::unordered_map<std::string, size_t> freq;
  for (const Dialog* d : dialogs) {
    std::set<TurnState> distinct;
    for (const DialogTurn& t : d->turns) {
      ++s.utterances;
      distinct.insert(t.state);
      ++s.state_counts[std::string(TurnStateName(t.state))];
      if (t.speaker == Speaker::kUser && IsQuestionState(t.state)) {
        ++questions;
        question_words += Words(t.utterance);
      }
      if (t.speaker == Speaker::kSystem && t.state == TurnState::kResponse) {
        ++responses;
        response_words += Words(t.utterance);
      }
      std::istringstream in(t.utterance);
      std::string w;
      while (in >> w) {
        for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        ++freq[w];
      }
    }
    states += distinct.size();
  }
  s.qa_utterances = questions + responses;
  auto avg = [](size_t num, size_t den) {
    return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  s.avg_utterances = avg(s.utterances, s.dialogs);
  s.avg_question_words = avg(question_words, questions);
  s.avg_response_words = avg(response_words, responses);
  s.avg_states = avg(states, s.dialogs);
  for (const auto& [w, n] : freq) s.vocab_size += n >= vocab_threshold ? 1 : 0;
  return s;
}

CorpusStats ComputeStats(const std::vector<Dialog>& dialogs, size_t vocab_threshold) {
  std::vector<const Dialog*> ptrs;
  for (const Dialog& d : dialogs) ptrs.push_back(&d);
  return ComputeStats(ptrs, vocab_threshold);
}

std::string StatsToJson(const CorpusStats& stats) { return StatsJson(stats).dump(2); }

std::string ReferenceStatsJson() {
  const Json ref{{"note", "published full-scale training split; not expected to match"},
                 {"dialogs", 152391},
                 {"avg_utterances", 15.9},
                 {"avg_question_words", 9.7},
                 {"avg_response_words", 4.74},
                 {"avg_states", 3.89},
                 {"vocab_size", 100000}};
  return ref.dump(2);
}

void WriteDialogs(const std::filesystem::path& path, const KgStore& store,
                  const std::vector<const Dialog*>& dialogs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  for (const Dialog* d : dialogs) out << DialogToJson(store, *d) << '\n';
  if (!out) throw Error("io", "write failed for " + path.string());
}

std::vector<Dialog> ReadDialogs(const std::filesystem::path& path, const KgStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::vector<Dialog> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(DialogFromJson(store, line));
    } catch (const Error& e) {
      throw Error(e.kind(), path.filename().string() + ":" + std::to_string(line_no) + ": " +
                                e.what());
    }
  }
  return out;
}

SplitReport WriteSplit(const std::filesystem::path& dir, const KgStore& store,
                       const Corpus& corpus, const CorpusSplit& split,
                       size_t vocab_threshold, const std::string& extra_json) {
  std::filesystem::create_directories(dir);
  auto pick = [&](const std::vector<size_t>& idx) {
    std::vector<const Dialog*> out;
    for (size_t i : idx) out.push_back(&corpus.dialogs[i]);
    return out;
  };
  const auto train = pick(split.train), valid = pick(split.valid), test = pick(split.test),
             discarded = pick(split.discarded);
  WriteDialogs(dir / "train.jsonl", store, train);
  WriteDialogs(dir / "valid.jsonl", store, valid);
  WriteDialogs(dir / "test.jsonl", store, test);
  WriteDialogs(dir / "discarded.jsonl", store, discarded);

  Json stats;
  stats["train"] = StatsJson(ComputeStats(train, vocab_threshold));
  stats["valid"] = StatsJson(ComputeStats(valid, vocab_threshold));
  stats["test"] = StatsJson(ComputeStats(test, vocab_threshold));
  stats["discarded"] = split.discarded.size();
  stats["failed_to_start"] = corpus.failed;
  stats["reference"] = Json::parse(ReferenceStatsJson());
  if (!extra_json.empty()) {
    const Json extra = Json::parse(extra_json);
    if (!extra.is_object()) throw Error("parse", "extra stats must be a JSON object");
    stats.update(extra);
  }
  std::ofstream out(dir / "stats.json", std::ios::binary);
  if (!out) throw Error("io", "cannot write " + (dir / "stats.json").string());
  out << stats.dump(2) << '\n';
  return {train.size(), valid.size(), test.size(), discarded.size()};
}

}  // namespace convqa
