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

// Key-value memory reader. No training: every parameter is an input.
//
//   w_i     = softmax_i(q_j . A k_i)
//   q_{j+1} = R_j (anchor + sum_i w_i A pad(v_i))
//   p_i     = softmax_i(q_{H+1} . B v_i)
//
// Keys are [v(relation), v(subject)] (2D wide), values are v(object) (D wide).
// pad() appends D zeros so one A serves both; with ValueMap::kSeparate a
// d x D matrix `A_value` is used for values instead.

#ifndef CONVQA_MEMNET_H_
#define CONVQA_MEMNET_H_

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "convqa/entity_linker.h"
#include "convqa/kg_embed.h"

namespace convqa {

inline constexpr size_t kDefaultHops = 2;
inline constexpr char kKgWord[] = "KG_WORD";

struct MemorySlab {
  EmbeddingMatrix keys;    // N x 2D
  EmbeddingMatrix values;  // N x D
  std::vector<Tuple> provenance;
  bool truncated = false;

  size_t size() const { return provenance.size(); }
};

// Row i comes from tuples[i]; rows beyond `cap` are dropped. Throws
// Error("unknown_id") if a tuple id is not embedded.
MemorySlab BuildMemory(const std::vector<Tuple>& tuples, const EmbeddingTable& table,
                       size_t cap = kDefaultMemoryCap);

enum class ValueMap { kPaddedA, kSeparate };
enum class HopAnchor { kCurrent, kInitial };

struct HopParams {
  Eigen::MatrixXd A;        // d x 2D
  Eigen::MatrixXd A_value;  // d x D, only with ValueMap::kSeparate
  std::vector<Eigen::MatrixXd> R;  // H maps, each d x d
  Eigen::MatrixXd B;        // d x D
  Eigen::VectorXd q1;       // d
  ValueMap value_map = ValueMap::kPaddedA;
  HopAnchor anchor = HopAnchor::kCurrent;

  size_t hops() const { return R.size(); }
};

// Max-shifted softmax.
Eigen::VectorXd Softmax(const Eigen::VectorXd& logits);

struct HopResult {
  Eigen::VectorXd q_next;
  Eigen::VectorXd attention;
};

// One pass with R_j and the given anchor. Throws Error("range") on an empty
// slab or inconsistent dimensions.
HopResult Hop(const Eigen::VectorXd& q, const MemorySlab& slab, const HopParams& params,
              size_t j, const Eigen::VectorXd& anchor);

struct MultiHopResult {
  Eigen::VectorXd q_final;
  std::vector<Eigen::VectorXd> attention;  // one per hop
};

MultiHopResult MultiHop(const MemorySlab& slab, const HopParams& params);

Eigen::VectorXd EntityDistribution(const Eigen::VectorXd& q_final, const MemorySlab& slab,
                                   const Eigen::MatrixXd& B);

// Distinct object entities of the slab rows, by descending probability with
// ties broken by entity id.
std::vector<EntityId> RankedEntities(const Eigen::VectorXd& distribution, const MemorySlab& slab);

// Replaces the n KG_WORD tokens with the n best distinct entities (labels);
// placeholders beyond the number of distinct entities are left in place.
std::vector<std::string> SubstituteKgWords(const std::vector<std::string>& tokens,
                                           const Eigen::VectorXd& distribution,
                                           const MemorySlab& slab, const KgStore& store);

// Golden vector records: {name, q1, keys, values, A, A_value?, R, B, anchor,
// value_map, expected_attention, expected_q_final, expected_distribution}.
struct KernelVector {
  std::string name;
  MemorySlab slab;
  HopParams params;
  std::vector<Eigen::VectorXd> expected_attention;
  Eigen::VectorXd expected_q_final;
  Eigen::VectorXd expected_distribution;
};

std::vector<KernelVector> LoadKernelVectors(const std::filesystem::path& path);

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Largest absolute deviation of MultiHop/EntityDistribution from the record.
double KernelVectorError(const KernelVector& v);

// Golden vectors (tolerance 1e-9) plus seeded property checks: softmax
// normalization, singleton and zero-map cases, duplication and permutation
// invariance, large-logit stability, shape closure, and the embedding
// gradient check.
std::vector<CheckOutcome> RunKernelChecks(const std::filesystem::path& vectors, uint64_t seed);

}  // namespace convqa

#endif  // CONVQA_MEMNET_H_
