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

// Translational embeddings: score(s, r, o) = |v(s) + v(r) - v(o)|_2, trained
// with a margin ranking loss and unit-norm entity vectors.

#ifndef CONVQA_KG_EMBED_H_
#define CONVQA_KG_EMBED_H_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "convqa/kg_store.h"

namespace convqa {

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EmbeddingTable {
  // One row per entity / relation, in dense id order.
  EmbeddingMatrix entities;
  EmbeddingMatrix relations;

  size_t dim() const { return static_cast<size_t>(entities.cols()); }
  Eigen::Ref<const Eigen::RowVectorXd> entity(EntityId id) const;
  Eigen::Ref<const Eigen::RowVectorXd> relation(RelationId id) const;
};

struct TrainConfig {
  size_t dim = 32;
  double margin = 1.0;
  double learning_rate = 0.01;
  size_t epochs = 200;
  size_t negatives = 1;
  uint64_t seed = 0;
};

// Uniform in +-6/sqrt(D), then every row scaled to unit norm.
EmbeddingTable InitTable(size_t num_entities, size_t num_relations, size_t dim, uint64_t seed);

// Throws Error("unknown_id") for ids outside the table.
double Score(const EmbeddingTable& table, const Tuple& tuple);

double MarginLoss(const EmbeddingTable& table, const Tuple& positive, const Tuple& negative,
                  double margin);

// Gradient of MarginLoss as dense matrices shaped like the table (zero rows
// for untouched ids). Zero when the margin is already satisfied.
struct TableGradient {
  EmbeddingMatrix entities;
  EmbeddingMatrix relations;
};
TableGradient MarginGradient(const EmbeddingTable& table, const Tuple& positive,
                             const Tuple& negative, double margin);

struct TrainResult {
  EmbeddingTable table;
  // Mean margin loss over the (positive, negative) pairs of each epoch.
  std::vector<double> epoch_loss;
};

// Deterministic per config.seed. A negative replaces the subject or the
// object (chosen uniformly) by a uniformly drawn different entity; draws that
// hit a tuple of the store are repeated up to 16 times. Throws
// Error("range") for dim 0, margin <= 0 or an empty store.
TrainResult Train(const KgStore& store, const TrainConfig& config);

struct RankStats {
  size_t count = 0;
  double mean_rank = 0;
  double hits_at_10 = 0;
};

struct LinkPredictionResult {
  RankStats subject_raw, object_raw;
  // Other known true tuples are removed from the ranking.
  RankStats subject_filtered, object_filtered;
};

// Ranks the true subject (object) of each held-out tuple among all entities.
// Ties with the truth count half, so rank = 1 + lower + ties / 2. Filtering
// uses `known` (typically the full store).
LinkPredictionResult EvaluateLinkPrediction(const EmbeddingTable& table,
                                            const std::vector<Tuple>& held_out,
                                            const KgStore& known);

// Uniformly random ranking over n entities.
RankStats RandomRankBaseline(size_t num_entities);

// Binary file: "CQEMBED1", uint32 D, uint32 entities, uint32 relations (all
// little endian), then float32 rows (entities, then relations). The sidecar
// `<path>.ids` lists "E<TAB>external id" and "R<TAB>external id" in row order.
void WriteEmbeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     const KgStore& store);
// Throws Error("load") when the file is malformed or its ids disagree with
// the store's vocabulary.
EmbeddingTable ReadEmbeddings(const std::filesystem::path& path, const KgStore& store);

}  // namespace convqa

#endif  // CONVQA_KG_EMBED_H_
