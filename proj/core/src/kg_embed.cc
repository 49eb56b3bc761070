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

#include "convqa/kg_embed.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <string>

#include "convqa/rng.h"

namespace convqa {
namespace {

constexpr char kMagic[8] = {'C', 'Q', 'E', 'M', 'B', 'E', 'D', '1'};

void CheckTuple(const EmbeddingTable& table, const Tuple& t) {
  const auto n = static_cast<uint32_t>(table.entities.rows());
  if (t.subject.value() >= n || t.object.value() >= n) {
    throw Error("unknown_id", "entity id outside the embedding table");
  }
  if (t.relation.value() >= static_cast<uint32_t>(table.relations.rows())) {
    throw Error("unknown_id", "relation id outside the embedding table");
  }
}

Eigen::RowVectorXd Residual(const EmbeddingTable& table, const Tuple& t) {
  return table.entities.row(t.subject.value()) + table.relations.row(t.relation.value()) -
         table.entities.row(t.object.value());
}

// Sparse form of the gradient: (row, vector) contributions.
struct SparseGrad {
  std::vector<std::pair<uint32_t, Eigen::RowVectorXd>> entities;
  std::vector<std::pair<uint32_t, Eigen::RowVectorXd>> relations;
};

// d|x|/dx = x/|x|, with 0 at the origin.
void AddScoreGrad(const EmbeddingTable& table, const Tuple& t, double sign, SparseGrad& g) {
  Eigen::RowVectorXd x = Residual(table, t);
  const double n = x.norm();
  if (n == 0) return;
  x *= sign / n;
  g.entities.emplace_back(t.subject.value(), x);
  g.relations.emplace_back(t.relation.value(), x);
  g.entities.emplace_back(t.object.value(), -x);
}

SparseGrad Gradient(const EmbeddingTable& table, const Tuple& pos, const Tuple& neg,
                    double margin) {
  SparseGrad g;
  if (margin + Score(table, pos) - Score(table, neg) <= 0) return g;
  AddScoreGrad(table, pos, 1.0, g);
  AddScoreGrad(table, neg, -1.0, g);
  return g;
}

void NormalizeRow(EmbeddingMatrix& m, Eigen::Index row) {
  const double n = m.row(row).norm();
  if (n > 0) m.row(row) /= n;
}

void PutU32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t GetU32(std::istream& in, const std::string& where) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("load", where + ": truncated file");
  return uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 | uint32_t{b[3]} << 24;
}

void WriteRows(std::ostream& out, const EmbeddingMatrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const float f = static_cast<float>(m(i, j));
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      PutU32(out, bits);
    }
  }
}

void ReadRows(std::istream& in, EmbeddingMatrix& m, const std::string& where) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const uint32_t bits = GetU32(in, where);
      float f;
      std::memcpy(&f, &bits, 4);
      if (!std::isfinite(f)) throw Error("load", where + ": non-finite value");
      m(i, j) = f;
    }
  }
}

std::filesystem::path IdsPath(const std::filesystem::path& path) {
  return path.string() + ".ids";
}

void AddRank(RankStats& s, double rank) {
  ++s.count;
  s.mean_rank += rank;
  s.hits_at_10 += rank <= 10.0 ? 1 : 0;
}

void FinishRank(RankStats& s) {
  if (s.count == 0) return;
  s.mean_rank /= static_cast<double>(s.count);
  s.hits_at_10 /= static_cast<double>(s.count);
}

}  // namespace

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingTable::entity(EntityId id) const {
  if (id.value() >= entities.rows()) throw Error("unknown_id", "entity id outside the table");
  return entities.row(id.value());
}

Eigen::Ref<const Eigen::RowVectorXd> EmbeddingTable::relation(RelationId id) const {
  if (id.value() >= relations.rows()) throw Error("unknown_id", "relation id outside the table");
  return relations.row(id.value());
}

EmbeddingTable InitTable(size_t num_entities, size_t num_relations, size_t dim, uint64_t seed) {
  if (dim == 0) throw Error("range", "embedding dimension must be at least 1");
  Rng rng(seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  EmbeddingTable t;
  t.entities.resize(static_cast<Eigen::Index>(num_entities), static_cast<Eigen::Index>(dim));
  t.relations.resize(static_cast<Eigen::Index>(num_relations), static_cast<Eigen::Index>(dim));
  for (EmbeddingMatrix* m : {&t.entities, &t.relations}) {
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = rng.Uniform(-bound, bound);
      NormalizeRow(*m, i);
    }
  }
  return t;
}

double Score(const EmbeddingTable& table, const Tuple& tuple) {
  CheckTuple(table, tuple);
  return Residual(table, tuple).norm();
}

double MarginLoss(const EmbeddingTable& table, const Tuple& positive, const Tuple& negative,
                  double margin) {
  return std::max(0.0, margin + Score(table, positive) - Score(table, negative));
}

TableGradient MarginGradient(const EmbeddingTable& table, const Tuple& positive,
                             const Tuple& negative, double margin) {
  TableGradient out{EmbeddingMatrix::Zero(table.entities.rows(), table.entities.cols()),
                    EmbeddingMatrix::Zero(table.relations.rows(), table.relations.cols())};
  const SparseGrad g = Gradient(table, positive, negative, margin);
  for (const auto& [row, v] : g.entities) out.entities.row(row) += v;
  for (const auto& [row, v] : g.relations) out.relations.row(row) += v;
  return out;
}

TrainResult Train(const KgStore& store, const TrainConfig& config) {
  if (config.dim == 0) throw Error("range", "embedding dimension must be at least 1");
  if (!(config.margin > 0)) throw Error("range", "margin must be positive");
  if (store.tuples().empty()) throw Error("range", "cannot train on an empty store");
  if (store.num_entities() < 2) throw Error("range", "need at least two entities");

  TrainResult result{InitTable(store.num_entities(), store.num_relations(), config.dim,
                               config.seed),
                     {}};
  EmbeddingTable& table = result.table;
  Rng rng(DeriveSeed(config.seed, 1));
  std::vector<Tuple> order(store.tuples().begin(), store.tuples().end());
  const uint64_t n = store.num_entities();
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0;
    size_t pairs = 0;
    for (const Tuple& pos : order) {
      for (size_t k = 0; k < config.negatives; ++k) {
        Tuple neg = pos;
        // Corruptions that are themselves known tuples are redrawn, up to a
        // bound, so the loss does not push apart true facts.
        for (int attempt = 0; attempt < 16; ++attempt) {
          neg = pos;
          const bool subject = rng.Bernoulli(0.5);
          EntityId& slot = subject ? neg.subject : neg.object;
          // Uniform over the other n - 1 entities.
          uint32_t draw = static_cast<uint32_t>(rng.Below(n - 1));
          if (draw >= slot.value()) ++draw;
          slot = EntityId(draw);
          if (!store.contains(neg)) break;
        }

        total += MarginLoss(table, pos, neg, config.margin);
        ++pairs;
        const SparseGrad g = Gradient(table, pos, neg, config.margin);
        for (const auto& [row, v] : g.entities) table.entities.row(row) -= config.learning_rate * v;
        for (const auto& [row, v] : g.relations) {
          table.relations.row(row) -= config.learning_rate * v;
        }
        for (const auto& [row, v] : g.entities) NormalizeRow(table.entities, row);
      }
    }
    result.epoch_loss.push_back(pairs ? total / static_cast<double>(pairs) : 0.0);
  }
  return result;
}

LinkPredictionResult EvaluateLinkPrediction(const EmbeddingTable& table,
                                            const std::vector<Tuple>& held_out,
                                            const KgStore& known) {
  LinkPredictionResult out;
  const auto n = static_cast<uint32_t>(table.entities.rows());
  for (const Tuple& truth : held_out) {
    const double true_score = Score(table, truth);
    for (const bool subject : {true, false}) {
      double lower = 0, ties = 0, lower_f = 0, ties_f = 0;
      for (uint32_t e = 0; e < n; ++e) {
        Tuple c = truth;
        (subject ? c.subject : c.object) = EntityId(e);
        if (c == truth) continue;
        const double s = Score(table, c);
        const bool is_lower = s < true_score, is_tie = s == true_score;
        lower += is_lower;
        ties += is_tie;
        if (!known.contains(c)) {
          lower_f += is_lower;
          ties_f += is_tie;
        }
      }
      AddRank(subject ? out.subject_raw : out.object_raw, 1 + lower + ties / 2);
      AddRank(subject ? out.subject_filtered : out.object_filtered, 1 + lower_f + ties_f / 2);
    }
  }
  for (RankStats* s : {&out.subject_raw, &out.object_raw, &out.subject_filtered,
                       &out.object_filtered}) {
    FinishRank(*s);
  }
  return out;
}

RankStats RandomRankBaseline(size_t num_entities) {
  RankStats s;
  if (num_entities == 0) return s;
  const auto n = static_cast<double>(num_entities);
  s.count = 1;
  s.mean_rank = (n + 1) / 2;
  s.hits_at_10 = std::min(10.0, n) / n;
  return s;
}

void WriteEmbeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     const KgStore& store) {
  if (static_cast<size_t>(table.entities.rows()) != store.num_entities() ||
      static_cast<size_t>(table.relations.rows()) != store.num_relations()) {
    throw Error("io", "embedding table does not match the store");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  PutU32(out, static_cast<uint32_t>(table.dim()));
  PutU32(out, static_cast<uint32_t>(table.entities.rows()));
  PutU32(out, static_cast<uint32_t>(table.relations.rows()));
  WriteRows(out, table.entities);
  WriteRows(out, table.relations);
  if (!out) throw Error("io", "failed writing " + path.string());

  std::ofstream ids(IdsPath(path));
  if (!ids) throw Error("io", "cannot write " + IdsPath(path).string());
  for (uint32_t i = 0; i < store.num_entities(); ++i) {
    ids << "E\t" << store.vocab().entity(EntityId(i)).external_id << "\n";
  }
  for (uint32_t i = 0; i < store.num_relations(); ++i) {
    ids << "R\t" << store.vocab().relation(RelationId(i)).external_id << "\n";
  }
}

EmbeddingTable ReadEmbeddings(const std::filesystem::path& path, const KgStore& store) {
  const std::string where = path.filename().string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load", "cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw Error("load", where + ": not an embedding file");
  }
  const uint32_t dim = GetU32(in, where);
  const uint32_t ne = GetU32(in, where);
  const uint32_t nr = GetU32(in, where);
  if (dim == 0) throw Error("load", where + ": zero dimension");
  if (ne != store.num_entities() || nr != store.num_relations()) {
    throw Error("load", where + ": counts do not match the knowledge graph");
  }
  EmbeddingTable t;
  t.entities.resize(ne, dim);
  t.relations.resize(nr, dim);
  ReadRows(in, t.entities, where);
  ReadRows(in, t.relations, where);
  if (in.peek() != std::char_traits<char>::eof()) throw Error("load", where + ": trailing bytes");

  std::ifstream ids(IdsPath(path));
  if (!ids) throw Error("load", "cannot open " + IdsPath(path).string());
  std::string line;
  uint32_t e = 0, r = 0;
  size_t line_no = 0;
  while (std::getline(ids, line)) {
    ++line_no;
    const std::string at = where + ".ids:" + std::to_string(line_no);
    if (line.size() < 2 || line[1] != '\t') throw Error("load", at + ": malformed line");
    const std::string id = line.substr(2);
    if (line[0] == 'E' && r == 0 && e < ne &&
        store.vocab().entity(EntityId(e)).external_id == id) {
      ++e;
    } else if (line[0] == 'R' && e == ne && r < nr &&
               store.vocab().relation(RelationId(r)).external_id == id) {
      ++r;
    } else {
      throw Error("load", at + ": id order does not match the knowledge graph");
    }
  }
  if (e != ne || r != nr) throw Error("load", where + ".ids: incomplete id list");
  return t;
}

}  // namespace convqa
