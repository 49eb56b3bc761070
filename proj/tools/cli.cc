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

#include "cli.h"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "convqa/dataset.h"
#include "convqa/entity_linker.h"
#include "convqa/eval.h"
#include "convqa/kg_embed.h"
#include "convqa/memnet.h"
#include "convqa/plan_text.h"
#include "convqa/synthetic.h"
#include "convqa/templates.h"
#include "json.hpp"

namespace convqa::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  std::string command;
  // Inputs and outputs.
  std::string kg;
  std::string synthetic;  // "ENTITIES:TUPLES", used when --kg is empty
  uint64_t kg_seed = 21;
  std::string templates;
  std::string corpus;
  std::string records;
  std::string out;
  std::string plan;
  std::string plans;
  std::string text;
  std::string aliases;
  std::string vectors = CONVQA_DEFAULT_KERNEL_VECTORS;
  std::string write_gold;
  // Randomness and scale.
  uint64_t seed = 0;
  size_t n = 100;
  size_t threads = 1;
  // Split.
  double train = 0.8, valid = 0.1, test = 0.1;
  uint64_t split_seed = 0;
  bool split_aware = true;
  size_t vocab_threshold = 10;
  // Dialog.
  DialogConfig dialog;
  std::string weights;
  // Ingest.
  std::string relations;
  double type_coverage = 1.0;
  // Linker and memory.
  size_t memory_cap = kDefaultMemoryCap;
  bool use_context = true;
  size_t hops = kDefaultHops;
  // Embeddings.
  TrainConfig embed;
};

json ConfigJson(const RunConfig& c) {
  json weights = json::object();
  for (const auto& [k, v] : c.dialog.transition_weights) weights[k] = v;
  return {
      {"command", c.command},
      {"kg", c.kg},
      {"synthetic", c.synthetic},
      {"kg_seed", c.kg_seed},
      {"templates", c.templates},
      {"corpus", c.corpus},
      {"records", c.records},
      {"out", c.out},
      {"seed", c.seed},
      {"n", c.n},
      {"threads", c.threads},
      {"split", {{"train", c.train}, {"valid", c.valid}, {"test", c.test},
                 {"seed", c.split_seed}, {"split_aware", c.split_aware}}},
      {"vocab_threshold", c.vocab_threshold},
      {"dialog", {{"display_limit", c.dialog.display_limit},
                  {"sample_size", c.dialog.sample_size},
                  {"ambiguity_rate", c.dialog.ambiguity_rate},
                  {"questions_per_dialog", c.dialog.questions_per_dialog},
                  {"answer_cap", c.dialog.answer_cap},
                  {"number_words", c.dialog.number_words},
                  {"transition_weights", weights}}},
      {"ingest", {{"relations", c.relations}, {"type_coverage", c.type_coverage}}},
      {"linker", {{"memory_cap", c.memory_cap}, {"use_context", c.use_context},
                  {"aliases", c.aliases}}},
      {"memnet", {{"hops", c.hops}, {"vectors", c.vectors}}},
      {"embed", {{"dim", c.embed.dim}, {"margin", c.embed.margin},
                 {"learning_rate", c.embed.learning_rate}, {"epochs", c.embed.epochs},
                 {"negatives", c.embed.negatives}}},
  };
}

std::map<std::string, double> ParseWeights(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error("parse", "weight '" + item + "' is not name=value");
    const std::string name = item.substr(0, eq);
    const auto& names = TransformNames();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw Error("parse", "unknown transform '" + name + "'");
    }
    try {
      out[name] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw Error("parse", "bad weight in '" + item + "'");
    }
  }
  return out;
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

KgStore LoadKg(const RunConfig& c) {
  if (!c.kg.empty()) return KgStore::LoadDirectory(c.kg);
  if (c.synthetic.empty()) throw Error("io", "one of --kg or --synthetic is required");
  const auto colon = c.synthetic.find(':');
  SyntheticKgOptions options;
  try {
    options.num_entities = std::stoul(c.synthetic.substr(0, colon));
    if (colon != std::string::npos) options.num_tuples = std::stoul(c.synthetic.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error("parse", "--synthetic expects ENTITIES:TUPLES");
  }
  return RandomKg(options, c.kg_seed);
}

fs::path TemplatesPath(const RunConfig& c) {
  if (!c.templates.empty()) return c.templates;
  if (!c.kg.empty() && fs::exists(fs::path(c.kg) / "templates.jsonl")) {
    return fs::path(c.kg) / "templates.jsonl";
  }
  throw Error("io", "--templates is required when the KG directory has no templates.jsonl");
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + path.string());
  f << text;
  if (!f) throw Error("io", "write failed for " + path.string());
}

fs::path RequireOut(const RunConfig& c) {
  if (c.out.empty()) throw Error("io", "--out is required");
  fs::create_directories(c.out);
  return c.out;
}

void WriteConfig(const fs::path& dir, const RunConfig& c) {
  WriteText(dir / "effective_config.json", ConfigJson(c).dump(2) + "\n");
}

SplitSpec Spec(const RunConfig& c) { return {c.train, c.valid, c.test, c.split_seed}; }

json StoreStatsJson(const StoreStats& s) {
  json hist = json::object();
  for (const auto& [fanout, count] : s.fanout_histogram) hist[std::to_string(fanout)] = count;
  return {{"tuples", s.tuples},
          {"entities", s.entities},
          {"active_entities", s.active_entities},
          {"relations", s.relations},
          {"types", s.types},
          {"entities_fanout_at_least_3", s.entities_fanout_at_least_3},
          {"one_one_tuples", s.one_one_tuples},
          {"one_many_tuples", s.one_many_tuples},
          {"fanout_histogram", hist}};
}

// --- Subcommands -------------------------------------------------------------

int Ingest(const RunConfig& c, std::ostream& out) {
  KgStore store = LoadKg(c);
  const size_t duplicates = store.load_report().duplicate_tuples;
  if (!c.relations.empty()) {
    std::set<RelationId> keep;
    for (const std::string& label : SplitList(c.relations)) keep.insert(store.relation(label));
    store = store.FilterRelations(keep);
  }
  json retained = json::array();
  if (c.type_coverage < 1.0) {
    auto filtered = store.FilterTypes(c.type_coverage);
    for (TypeId t : filtered.retained) retained.push_back(store.label(t));
    store = std::move(filtered.store);
  }
  const fs::path dir = RequireOut(c);
  store.WriteDirectory(dir);
  if (!c.kg.empty() && fs::exists(fs::path(c.kg) / "templates.jsonl")) {
    fs::copy_file(fs::path(c.kg) / "templates.jsonl", dir / "templates.jsonl",
                  fs::copy_options::overwrite_existing);
  }
  const json report{{"stats", StoreStatsJson(store.Stats())},
                    {"duplicate_tuples_dropped", duplicates},
                    {"retained_types", retained},
                    {"config", ConfigJson(c)}};
  WriteText(dir / "ingest_report.json", report.dump(2) + "\n");
  WriteConfig(dir, c);
  out << report.at("stats").dump() << "\n";
  return kExitOk;
}

int Generate(const RunConfig& c, std::ostream& out) {
  const KgStore store = LoadKg(c);
  const DialogGenerator gen(store, LoadTemplates(TemplatesPath(c)), c.dialog);
  std::optional<SplitSpec> spec;
  if (c.split_aware) spec = Spec(c);
  const Corpus corpus = GenerateCorpus(store, gen, c.n, c.seed, c.threads, spec);
  const fs::path dir = RequireOut(c);
  std::vector<const Dialog*> all;
  for (const Dialog& d : corpus.dialogs) all.push_back(&d);
  WriteDialogs(dir / "dialogs.jsonl", store, all);
  json stats = json::parse(StatsToJson(ComputeStats(corpus.dialogs, c.vocab_threshold)));
  const json doc{{"corpus", stats},
                 {"failed", corpus.failed},
                 {"reference", json::parse(ReferenceStatsJson())},
                 {"config", ConfigJson(c)}};
  WriteText(dir / "stats.json", doc.dump(2) + "\n");
  WriteConfig(dir, c);
  out << "dialogs " << corpus.dialogs.size() << " failed " << corpus.failed << "\n";
  return kExitOk;
}

Corpus ReadCorpus(const KgStore& store, const RunConfig& c) {
  if (c.corpus.empty()) throw Error("io", "--corpus is required");
  Corpus corpus;
  corpus.dialogs = ReadDialogs(c.corpus, store);
  for (const Dialog& d : corpus.dialogs) corpus.provenance.push_back(DialogProvenance(store, d));
  return corpus;
}

int Split(const RunConfig& c, std::ostream& out) {
  const KgStore store = LoadKg(c);
  const Corpus corpus = ReadCorpus(store, c);
  const CorpusSplit split = SplitCorpus(corpus, Spec(c));
  const fs::path dir = RequireOut(c);
  const SplitReport r = WriteSplit(dir, store, corpus, split, c.vocab_threshold,
                                   json{{"config", ConfigJson(c)}}.dump());
  WriteConfig(dir, c);
  out << "train " << r.train << " valid " << r.valid << " test " << r.test << " discarded "
      << r.discarded << "\n";
  return kExitOk;
}

int Stats(const RunConfig& c, std::ostream& out) {
  const KgStore store = LoadKg(c);
  const Corpus corpus = ReadCorpus(store, c);
  const json doc{{"corpus", json::parse(StatsToJson(ComputeStats(corpus.dialogs, c.vocab_threshold)))},
                 {"reference", json::parse(ReferenceStatsJson())},
                 {"config", ConfigJson(c)}};
  if (!c.out.empty()) WriteText(RequireOut(c) / "stats.json", doc.dump(2) + "\n");
  out << doc.dump(2) << "\n";
  return kExitOk;
}

// Replaces "that <type>" atoms by the entity they refer to in `context`.
SyntaxNode ResolveShorthand(const KgStore& store, const DialogContext& context,
                            const SyntaxNode& node) {
  if (node.is_call) {
    SyntaxNode copy = node;
    for (SyntaxNode& a : copy.args) a = ResolveShorthand(store, context, a);
    return copy;
  }
  if (node.quoted || node.text.rfind("that ", 0) != 0) return node;
  const TypeId type = store.type(node.text.substr(5));
  const auto resolved = ResolveCoreference(store, context, type);
  if (const EntityId* e = std::get_if<EntityId>(&resolved)) return EntityAtom(store, *e);
  std::string names;
  for (EntityId e : std::get<Ambiguous>(resolved).candidates) {
    names += (names.empty() ? "" : ", ") + store.label(e);
  }
  throw Error("dialog", "'" + node.text + "' is ambiguous: " + names);
}

std::string AnswerLine(const KgStore& store, DialogContext& context, const std::string& line,
                       const ExecOptions& exec) {
  const SyntaxNode syntax = ResolveShorthand(store, context, ParseSyntax(line));
  const QueryPlan plan = ResolvePlan(store, syntax);
  const AnswerSet answer = Execute(store, plan, exec);
  AdvanceContext(context, plan, answer);
  return RenderAnswerText(store, answer);
}

std::string ErrorLine(const Error& e) {
  return "error: kind=" + e.kind() + " message=" + e.what();
}

int Answer(const RunConfig& c, std::istream& in, std::ostream& out, std::ostream& err) {
  const KgStore store = LoadKg(c);
  DialogContext context;
  if (!c.plan.empty()) {
    out << AnswerLine(store, context, c.plan, c.dialog.exec) << "\n";
    return kExitOk;
  }
  if (!c.plans.empty()) {
    std::ifstream f(c.plans);
    if (!f) throw Error("io", "cannot open " + c.plans);
    for (std::string line; std::getline(f, line);) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      out << AnswerLine(store, context, line, c.dialog.exec) << "\n";
    }
    return kExitOk;
  }
  // REPL: one plan per line; errors are reported and the session goes on.
  for (std::string line; std::getline(in, line);) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line == "quit" || line == "exit") break;
    try {
      out << AnswerLine(store, context, line, c.dialog.exec) << "\n";
    } catch (const Error& e) {
      err << ErrorLine(e) << "\n";
    }
  }
  return kExitOk;
}

Gazetteer BuildGazetteer(const KgStore& store, const RunConfig& c) {
  Gazetteer g = Gazetteer::Build(store);
  if (!c.aliases.empty()) g.LoadAliases(c.aliases, store);
  return g;
}

int LinkCommand(const RunConfig& c, std::ostream& out) {
  const KgStore store = LoadKg(c);
  const Gazetteer gaz = BuildGazetteer(store, c);
  if (!c.text.empty()) {
    const std::vector<Mention> mentions = Link(gaz, c.text);
    const CandidateSet cands = CandidateTuples(store, MatchedEntities(mentions), c.memory_cap);
    json ms = json::array();
    for (const Mention& m : mentions) {
      json ids = json::array();
      for (EntityId e : m.entities.ids()) ids.push_back(store.vocab().entity(e).external_id);
      ms.push_back({{"text", m.text}, {"begin", m.begin}, {"end", m.end}, {"entities", ids}});
    }
    json ts = json::array();
    for (const Tuple& t : cands.tuples) {
      ts.push_back({store.label(t.relation), store.label(t.subject), store.label(t.object)});
    }
    out << json{{"mentions", ms}, {"candidates", ts}, {"truncated", cands.truncated}}.dump() << "\n";
    return kExitOk;
  }
  const Corpus corpus = ReadCorpus(store, c);
  const RecallReport report =
      LinkerRecall(store, gaz, corpus.dialogs, LinkOptions{c.memory_cap, c.use_context});
  json doc = json::parse(RecallReportToJson(report));
  doc["config"] = ConfigJson(c);
  if (!c.out.empty()) WriteText(RequireOut(c) / "link_report.json", doc.dump(2) + "\n");
  out << RecallReportToJson(report) << "\n";
  return kExitOk;
}

json RankJson(const RankStats& r) {
  return {{"count", r.count}, {"mean_rank", r.mean_rank}, {"hits_at_10", r.hits_at_10}};
}

int Embed(const RunConfig& c, std::ostream& out) {
  const KgStore store = LoadKg(c);
  TrainConfig tc = c.embed;
  tc.seed = c.seed;
  const TrainResult trained = Train(store, tc);
  const LinkPredictionResult lp = EvaluateLinkPrediction(trained.table, store.tuples(), store);
  const json doc{
      {"final_loss", trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back()},
      {"epoch_loss", trained.epoch_loss},
      {"evaluated_on", "training tuples"},
      {"subject_raw", RankJson(lp.subject_raw)},
      {"object_raw", RankJson(lp.object_raw)},
      {"subject_filtered", RankJson(lp.subject_filtered)},
      {"object_filtered", RankJson(lp.object_filtered)},
      {"random_baseline", RankJson(RandomRankBaseline(store.num_entities()))},
      {"config", ConfigJson(c)}};
  const fs::path dir = RequireOut(c);
  WriteEmbeddings(dir / "embeddings.bin", trained.table, store);
  WriteText(dir / "embed_report.json", doc.dump(2) + "\n");
  WriteConfig(dir, c);
  json brief = doc;
  brief.erase("epoch_loss");
  brief.erase("config");
  out << brief.dump() << "\n";
  return kExitOk;
}

int KernelCheck(const RunConfig& c, std::ostream& out, std::ostream& err) {
  bool ok = true;
  for (const CheckOutcome& o : RunKernelChecks(c.vectors, c.seed)) {
    out << (o.passed ? "PASS " : "FAIL ") << o.name << "  " << o.detail << "\n";
    ok = ok && o.passed;
  }
  if (ok) return kExitOk;
  err << ErrorLine(Error("guard", "kernel checks failed")) << "\n";
  return kExitRuntime;
}

int EvalCommand(const RunConfig& c, std::ostream& out) {
  if (!c.write_gold.empty()) {
    const KgStore store = LoadKg(c);
    const Corpus corpus = ReadCorpus(store, c);
    std::string text;
    for (const EvalRecord& r : GoldRecords(store, corpus.dialogs, c.dialog.exec)) {
      text += EvalRecordToJson(r) + "\n";
    }
    WriteText(c.write_gold, text);
    return kExitOk;
  }
  if (c.records.empty()) throw Error("io", "--records or --write-gold is required");
  const Report report = Aggregate(ReadEvalRecords(c.records));
  const std::string table = ReportToTable(report);
  if (!c.out.empty()) {
    const fs::path dir = RequireOut(c);
    WriteText(dir / "report.json", ReportToJson(report, ConfigJson(c).dump()));
    WriteText(dir / "report.txt", table);
    WriteConfig(dir, c);
  }
  out << table;
  return kExitOk;
}

// --- Option wiring -------------------------------------------------------------

template <typename T>
CLI::Option* Add(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
  std::string env = "CONVQA_";
  for (char ch : flag.substr(2)) env += ch == '-' ? '_' : static_cast<char>(std::toupper(ch));
  return app->add_option(flag, value, help)->envname(env)->capture_default_str();
}

void KgOptions(CLI::App* app, RunConfig& c) {
  Add(app, "--kg", c.kg, "KG directory (tuples.tsv, labels.tsv, types.tsv)");
  Add(app, "--synthetic", c.synthetic, "Seeded random KG ENTITIES:TUPLES instead of --kg");
  Add(app, "--kg-seed", c.kg_seed, "Seed of the synthetic KG");
}

void SplitOptions(CLI::App* app, RunConfig& c) {
  Add(app, "--train", c.train, "Train fraction of tuples");
  Add(app, "--valid", c.valid, "Validation fraction of tuples");
  Add(app, "--test", c.test, "Test fraction of tuples");
  Add(app, "--split-seed", c.split_seed, "Seed of the tuple partition");
}

void DialogOptions(CLI::App* app, RunConfig& c) {
  Add(app, "--display-limit", c.dialog.display_limit, "Largest answer listed in full");
  Add(app, "--sample-size", c.dialog.sample_size, "Entities shown after negotiation");
  Add(app, "--ambiguity-rate", c.dialog.ambiguity_rate, "Share of ambiguous coreferences");
  Add(app, "--questions", c.dialog.questions_per_dialog, "Questions per dialog");
  Add(app, "--answer-cap", c.dialog.answer_cap, "Largest answer a question may have");
  Add(app, "--weights", c.weights, "Transform weights, e.g. direct=1,boolean=2");
  app->add_flag("--number-words", c.dialog.number_words, "Spell counts as words")
      ->envname("CONVQA_NUMBER_WORDS");
}

}  // namespace

int Dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
             std::ostream& err) {
  RunConfig c;
  CLI::App app{"Conversational KG question answering toolkit", "convqa"};
  app.set_config("--config", "", "TOML config file; flags override it");
  app.require_subcommand(1);

  CLI::App* ingest = app.add_subcommand("ingest", "Load, filter and rewrite a KG");
  KgOptions(ingest, c);
  Add(ingest, "--relations", c.relations, "Comma-separated relation labels to keep");
  Add(ingest, "--type-coverage", c.type_coverage, "Tuple coverage of retained types")
      ->check(CLI::Range(0.0, 1.0));
  Add(ingest, "--out", c.out, "Output directory");

  CLI::App* generate = app.add_subcommand("generate", "Generate a dialog corpus");
  KgOptions(generate, c);
  Add(generate, "--templates", c.templates, "Template file (default <kg>/templates.jsonl)");
  Add(generate, "--n", c.n, "Number of dialogs");
  Add(generate, "--seed", c.seed, "Corpus seed");
  Add(generate, "--threads", c.threads, "Worker threads (output does not depend on it)");
  Add(generate, "--vocab-threshold", c.vocab_threshold, "Minimum token frequency");
  Add(generate, "--out", c.out, "Output directory");
  SplitOptions(generate, c);
  generate->add_flag("--split-aware,!--no-split-aware", c.split_aware,
                     "Keep each dialog inside one tuple partition")
      ->envname("CONVQA_SPLIT_AWARE");
  DialogOptions(generate, c);

  CLI::App* split = app.add_subcommand("split", "Partition a corpus by tuple provenance");
  KgOptions(split, c);
  Add(split, "--corpus", c.corpus, "Dialogs .jsonl");
  Add(split, "--vocab-threshold", c.vocab_threshold, "Minimum token frequency");
  Add(split, "--out", c.out, "Output directory");
  SplitOptions(split, c);

  CLI::App* stats = app.add_subcommand("stats", "Corpus statistics");
  KgOptions(stats, c);
  Add(stats, "--corpus", c.corpus, "Dialogs .jsonl");
  Add(stats, "--vocab-threshold", c.vocab_threshold, "Minimum token frequency");
  Add(stats, "--out", c.out, "Also write stats.json here");

  CLI::App* answer = app.add_subcommand(
      "answer", "Answer plans: --plan, --plans FILE, or a REPL on stdin");
  KgOptions(answer, c);
  Add(answer, "--plan", c.plan, "One plan in canonical text");
  Add(answer, "--plans", c.plans, "File with one plan per line");
  Add(answer, "--answer-cap", c.dialog.answer_cap, "Largest answer a question may have");

  CLI::App* link = app.add_subcommand("link", "Entity linking and candidate retrieval");
  KgOptions(link, c);
  Add(link, "--text", c.text, "Utterance to link");
  Add(link, "--corpus", c.corpus, "Dialogs .jsonl for the recall report");
  Add(link, "--aliases", c.aliases, "Extra names: external id <TAB> alias");
  Add(link, "--memory-cap", c.memory_cap, "Candidate tuple cap")->check(CLI::PositiveNumber);
  link->add_flag("--context,!--no-context", c.use_context, "Add previous-turn entities")
      ->envname("CONVQA_CONTEXT");
  Add(link, "--out", c.out, "Also write link_report.json here");

  CLI::App* embed = app.add_subcommand("embed", "Train translational embeddings");
  KgOptions(embed, c);
  Add(embed, "--dim", c.embed.dim, "Embedding dimension");
  Add(embed, "--margin", c.embed.margin, "Ranking margin");
  Add(embed, "--lr", c.embed.learning_rate, "Learning rate");
  Add(embed, "--epochs", c.embed.epochs, "Epochs");
  Add(embed, "--negatives", c.embed.negatives, "Negatives per tuple");
  Add(embed, "--seed", c.seed, "Training seed");
  Add(embed, "--out", c.out, "Output directory");

  CLI::App* kernel = app.add_subcommand("kernel-check", "Memory reader golden and property checks");
  Add(kernel, "--vectors", c.vectors, "Golden vector file");
  Add(kernel, "--seed", c.seed, "Seed of the property checks");

  CLI::App* eval = app.add_subcommand("eval", "Score prediction records");
  Add(eval, "--records", c.records, "Records .jsonl");
  Add(eval, "--out", c.out, "Write report.json and report.txt here");
  KgOptions(eval, c);
  Add(eval, "--corpus", c.corpus, "Dialogs .jsonl (with --write-gold)");
  Add(eval, "--write-gold", c.write_gold, "Write gold records of --corpus to this file");

  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    c.command = app.get_subcommands().front()->get_name();
    c.dialog.transition_weights = ParseWeights(c.weights);
    if (c.command == "ingest") return Ingest(c, out);
    if (c.command == "generate") return Generate(c, out);
    if (c.command == "split") return Split(c, out);
    if (c.command == "stats") return Stats(c, out);
    if (c.command == "answer") return Answer(c, in, out, err);
    if (c.command == "link") return LinkCommand(c, out);
    if (c.command == "embed") return Embed(c, out);
    if (c.command == "kernel-check") return KernelCheck(c, out, err);
    return EvalCommand(c, out);
  } catch (const Error& e) {
    err << ErrorLine(e) << "\n";
  } catch (const fs::filesystem_error& e) {
    err << ErrorLine(Error("io", e.what())) << "\n";
  } catch (const nlohmann::json::exception& e) {
    err << ErrorLine(Error("parse", e.what())) << "\n";
  }
  return kExitRuntime;
}

}  // namespace convqa::cli
