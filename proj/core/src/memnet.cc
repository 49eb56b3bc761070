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

#include "convqa/memnet.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "convqa/rng.h"
#include "json.hpp"

namespace convqa {
namespace {

using nlohmann::json;

void Require(bool ok, const std::string& what) {
  if (!ok) throw Error("range", what);
}

// Values projected into query space, one column per row of the slab.
Eigen::MatrixXd ProjectedValues(const MemorySlab& slab, const HopParams& p) {
  const Eigen::Index d = p.A.rows();
  const Eigen::Index D = slab.values.cols();
  if (p.value_map == ValueMap::kSeparate) {
    Require(p.A_value.rows() == d && p.A_value.cols() == D, "A_value must be d x D");
    return p.A_value * slab.values.transpose();
  }
  Require(p.A.cols() == 2 * D, "A must be d x 2D to take padded values");
  return p.A.leftCols(D) * slab.values.transpose();
}

Eigen::VectorXd VectorFrom(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j.at(i).get<double>();
  return v;
}

template <typename M>
M MatrixFrom(const json& j, Eigen::Index cols_if_empty = 0) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : cols_if_empty;
  M m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw Error("load", "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<size_t>(c)).get<double>();
  }
  return m;
}

Eigen::MatrixXd RandomMatrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.Uniform(-1, 1);
  return m;
}

MemorySlab RandomSlab(Rng& rng, Eigen::Index n, Eigen::Index D) {
  MemorySlab s;
  s.keys = RandomMatrix(rng, n, 2 * D);
  s.values = RandomMatrix(rng, n, D);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.provenance.push_back({RelationId(0), EntityId(0), EntityId(static_cast<uint32_t>(i))});
  }
  return s;
}

HopParams RandomParams(Rng& rng, Eigen::Index d, Eigen::Index D, size_t hops) {
  HopParams p;
  p.A = RandomMatrix(rng, d, 2 * D);
  for (size_t j = 0; j < hops; ++j) p.R.push_back(RandomMatrix(rng, d, d));
  p.B = RandomMatrix(rng, d, D);
  p.q1 = RandomMatrix(rng, d, 1);
  return p;
}

MemorySlab Duplicated(const MemorySlab& s) {
  MemorySlab out;
  out.keys.resize(2 * s.keys.rows(), s.keys.cols());
  out.values.resize(2 * s.values.rows(), s.values.cols());
  out.keys << s.keys, s.keys;
  out.values << s.values, s.values;
  out.provenance = s.provenance;
  out.provenance.insert(out.provenance.end(), s.provenance.begin(), s.provenance.end());
  return out;
}

std::string Fmt(double x) {
  std::ostringstream out;
  out.precision(3);
  out << x;
  return out.str();
}

}  // namespace

MemorySlab BuildMemory(const std::vector<Tuple>& tuples, const EmbeddingTable& table, size_t cap) {
  const size_t n = std::min(tuples.size(), cap);
  const auto D = static_cast<Eigen::Index>(table.dim());
  MemorySlab s;
  s.truncated = tuples.size() > cap;
  s.keys.resize(static_cast<Eigen::Index>(n), 2 * D);
  s.values.resize(static_cast<Eigen::Index>(n), D);
  for (size_t i = 0; i < n; ++i) {
    const Tuple& t = tuples[i];
    const auto row = static_cast<Eigen::Index>(i);
    s.keys.row(row) << table.relation(t.relation), table.entity(t.subject);
    s.values.row(row) = table.entity(t.object);
    s.provenance.push_back(t);
  }
  return s;
}

Eigen::VectorXd Softmax(const Eigen::VectorXd& logits) {
  Require(logits.size() > 0, "softmax over an empty vector");
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

HopResult Hop(const Eigen::VectorXd& q, const MemorySlab& slab, const HopParams& params,
              size_t j, const Eigen::VectorXd& anchor) {
  Require(slab.size() > 0, "hop over an empty memory");
  const Eigen::Index d = params.A.rows();
  Require(q.size() == d && anchor.size() == d, "query size must match the rows of A");
  Require(params.A.cols() == slab.keys.cols(), "A must be d x 2D");
  Require(j < params.R.size(), "no R for this hop");
  Require(params.R[j].rows() == d && params.R[j].cols() == d, "R must be d x d");
  const Eigen::MatrixXd keys = params.A * slab.keys.transpose();  // d x N
  HopResult out;
  out.attention = Softmax(keys.transpose() * q);
  out.q_next = params.R[j] * (anchor + ProjectedValues(slab, params) * out.attention);
  return out;
}

MultiHopResult MultiHop(const MemorySlab& slab, const HopParams& params) {
  Require(params.hops() >= 1, "at least one hop is needed");
  MultiHopResult out;
  Eigen::VectorXd q = params.q1;
  for (size_t j = 0; j < params.hops(); ++j) {
    const Eigen::VectorXd& anchor = params.anchor == HopAnchor::kCurrent ? q : params.q1;
    HopResult h = Hop(q, slab, params, j, anchor);
    out.attention.push_back(std::move(h.attention));
    q = std::move(h.q_next);
  }
  out.q_final = std::move(q);
  return out;
}

Eigen::VectorXd EntityDistribution(const Eigen::VectorXd& q_final, const MemorySlab& slab,
                                   const Eigen::MatrixXd& B) {
  Require(slab.size() > 0, "distribution over an empty memory");
  Require(B.rows() == q_final.size() && B.cols() == slab.values.cols(), "B must be d x D");
  return Softmax((B * slab.values.transpose()).transpose() * q_final);
}

std::vector<EntityId> RankedEntities(const Eigen::VectorXd& distribution, const MemorySlab& slab) {
  Require(static_cast<size_t>(distribution.size()) == slab.size(), "distribution size mismatch");
  std::vector<size_t> rows(slab.size());
  std::iota(rows.begin(), rows.end(), size_t{0});
  std::sort(rows.begin(), rows.end(), [&](size_t a, size_t b) {
    const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
    if (distribution(ia) != distribution(ib)) return distribution(ia) > distribution(ib);
    return slab.provenance[a].object < slab.provenance[b].object;
  });
  std::vector<EntityId> out;
  for (size_t r : rows) {
    const EntityId e = slab.provenance[r].object;
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  return out;
}

std::vector<std::string> SubstituteKgWords(const std::vector<std::string>& tokens,
                                           const Eigen::VectorXd& distribution,
                                           const MemorySlab& slab, const KgStore& store) {
  const std::vector<EntityId> ranked = RankedEntities(distribution, slab);
  std::vector<std::string> out = tokens;
  size_t next = 0;
  for (std::string& t : out) {
    if (t == kKgWord && next < ranked.size()) t = store.label(ranked[next++]);
  }
  return out;
}

std::vector<KernelVector> LoadKernelVectors(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("load", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
    std::vector<KernelVector> out;
    for (const json& r : doc.at("vectors")) {
      KernelVector v;
      v.name = r.at("name").get<std::string>();
      v.slab.keys = MatrixFrom<EmbeddingMatrix>(r.at("keys"));
      v.slab.values = MatrixFrom<EmbeddingMatrix>(r.at("values"));
      for (Eigen::Index i = 0; i < v.slab.values.rows(); ++i) {
        v.slab.provenance.push_back({RelationId(0), EntityId(0), EntityId(static_cast<uint32_t>(i))});
      }
      v.params.q1 = VectorFrom(r.at("q1"));
      v.params.A = MatrixFrom<Eigen::MatrixXd>(r.at("A"));
      if (r.contains("A_value")) v.params.A_value = MatrixFrom<Eigen::MatrixXd>(r.at("A_value"));
      for (const json& m : r.at("R")) v.params.R.push_back(MatrixFrom<Eigen::MatrixXd>(m));
      v.params.B = MatrixFrom<Eigen::MatrixXd>(r.at("B"));
      v.params.anchor = r.at("anchor") == "initial" ? HopAnchor::kInitial : HopAnchor::kCurrent;
      v.params.value_map = r.at("value_map") == "separate" ? ValueMap::kSeparate : ValueMap::kPaddedA;
      for (const json& a : r.at("expected_attention")) v.expected_attention.push_back(VectorFrom(a));
      v.expected_q_final = VectorFrom(r.at("expected_q_final"));
      v.expected_distribution = VectorFrom(r.at("expected_distribution"));
      out.push_back(std::move(v));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error("load", path.filename().string() + ": " + e.what());
  }
}

double KernelVectorError(const KernelVector& v) {
  const MultiHopResult r = MultiHop(v.slab, v.params);
  Require(r.attention.size() == v.expected_attention.size(), v.name + ": hop count differs");
  double err = 0;
  auto diff = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Require(a.size() == b.size(), v.name + ": size differs");
    if (a.size()) err = std::max(err, (a - b).cwiseAbs().maxCoeff());
  };
  for (size_t j = 0; j < r.attention.size(); ++j) diff(r.attention[j], v.expected_attention[j]);
  diff(r.q_final, v.expected_q_final);
  diff(EntityDistribution(r.q_final, v.slab, v.params.B), v.expected_distribution);
  return err;
}

std::vector<CheckOutcome> RunKernelChecks(const std::filesystem::path& vectors, uint64_t seed) {
  std::vector<CheckOutcome> out;
  auto record = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };

  try {
    const auto golden = LoadKernelVectors(vectors);
    for (const KernelVector& v : golden) {
      const double err = KernelVectorError(v);
      record("golden/" + v.name, err <= 1e-9, "max abs error " + Fmt(err));
    }
    if (golden.empty()) record("golden", false, "no vectors in file");
  } catch (const Error& e) {
    record("golden", false, e.what());
  }

  Rng rng(seed);
  double worst_norm = 0, worst_dup = 0, worst_perm = 0;
  bool shapes_ok = true, singleton_ok = true, uniform_ok = true, stable = true;
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = static_cast<Eigen::Index>(1 + rng.Below(6));
    const auto D = static_cast<Eigen::Index>(1 + rng.Below(5));
    const auto n = static_cast<Eigen::Index>(1 + rng.Below(12));
    const MemorySlab slab = RandomSlab(rng, n, D);
    HopParams p = RandomParams(rng, d, D, 1 + rng.Below(3));
    const MultiHopResult r = MultiHop(slab, p);
    shapes_ok = shapes_ok && r.q_final.size() == d && r.attention.size() == p.hops();
    const Eigen::VectorXd dist = EntityDistribution(r.q_final, slab, p.B);
    for (const Eigen::VectorXd& a : r.attention) {
      worst_norm = std::max(worst_norm, std::abs(a.sum() - 1));
      shapes_ok = shapes_ok && a.size() == n && (a.array() >= 0).all();
    }
    worst_norm = std::max(worst_norm, std::abs(dist.sum() - 1));

    const MultiHopResult dup = MultiHop(Duplicated(slab), p);
    worst_dup = std::max(worst_dup, (dup.q_final - r.q_final).cwiseAbs().maxCoeff());

    std::vector<Eigen::Index> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    rng.Shuffle(perm);
    MemorySlab shuffled = slab;
    for (Eigen::Index i = 0; i < n; ++i) {
      shuffled.keys.row(i) = slab.keys.row(perm[static_cast<size_t>(i)]);
      shuffled.values.row(i) = slab.values.row(perm[static_cast<size_t>(i)]);
    }
    const MultiHopResult pr = MultiHop(shuffled, p);
    worst_perm = std::max(worst_perm, (pr.q_final - r.q_final).cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < n; ++i) {
      worst_perm = std::max(worst_perm, std::abs(pr.attention[0](i) -
                                                 r.attention[0](perm[static_cast<size_t>(i)])));
    }

    const MemorySlab one = RandomSlab(rng, 1, D);
    const MultiHopResult single = MultiHop(one, p);
    singleton_ok = singleton_ok && single.attention[0](0) == 1.0 &&
                   EntityDistribution(single.q_final, one, p.B)(0) == 1.0;

    HopParams zero = p;
    zero.A.setZero();
    zero.B.setZero();
    const MultiHopResult z = MultiHop(slab, zero);
    const double u = 1.0 / static_cast<double>(n);
    uniform_ok = uniform_ok && (z.attention[0].array() - u).abs().maxCoeff() < 1e-15 &&
                 (EntityDistribution(z.q_final, slab, zero.B).array() - u).abs().maxCoeff() < 1e-15;

    HopParams big = p;
    big.A *= 1e4 / std::max(1e-12, p.A.cwiseAbs().maxCoeff());
    big.q1 = p.q1.normalized() * 1e2;
    const MultiHopResult b = MultiHop(slab, big);
    stable = stable && b.q_final.allFinite();
    for (const auto& a : b.attention) stable = stable && a.allFinite();
  }
  record("softmax_normalization", worst_norm <= 1e-9, "max |sum - 1| " + Fmt(worst_norm));
  record("singleton_memory", singleton_ok, "N=1 gives weight 1.0");
  record("zero_maps_uniform", uniform_ok, "A=0 and B=0 give 1/N");
  record("duplication_invariance", worst_dup <= 1e-7, "max deviation " + Fmt(worst_dup));
  record("permutation_invariance", worst_perm <= 1e-9, "max deviation " + Fmt(worst_perm));
  record("large_logit_stability", stable, "logits up to 1e4 stay finite");
  record("shape_closure", shapes_ok, "query stays d-dimensional");
  record("default_hops", kDefaultHops == 2, "H = " + std::to_string(kDefaultHops));
  record("default_memory_cap", kDefaultMemoryCap == 10000,
         "cap = " + std::to_string(kDefaultMemoryCap));

  // Embedding gradient against central differences at 5 points.
  double worst_grad = 0;
  int points = 0;
  for (uint64_t k = 0; points < 5 && k < 200; ++k) {
    EmbeddingTable t = InitTable(6, 2, 5, DeriveSeed(seed, k));
    const Tuple pos{RelationId(static_cast<uint32_t>(rng.Below(2))), EntityId(0), EntityId(1)};
    const Tuple neg{pos.relation, EntityId(0), EntityId(static_cast<uint32_t>(2 + rng.Below(4)))};
    const double margin = 4.0;
    if (MarginLoss(t, pos, neg, margin) <= 0.1) continue;
    const TableGradient g = MarginGradient(t, pos, neg, margin);
    double diff = 0, na = 0, nn = 0;
    const double h = 1e-6;
    for (EmbeddingMatrix* m : {&t.entities, &t.relations}) {
      const EmbeddingMatrix& ga = m == &t.entities ? g.entities : g.relations;
      for (Eigen::Index i = 0; i < m->size(); ++i) {
        const double keep = m->data()[i];
        m->data()[i] = keep + h;
        const double up = MarginLoss(t, pos, neg, margin);
        m->data()[i] = keep - h;
        const double down = MarginLoss(t, pos, neg, margin);
        m->data()[i] = keep;
        const double fd = (up - down) / (2 * h);
        diff += (fd - ga.data()[i]) * (fd - ga.data()[i]);
        na += ga.data()[i] * ga.data()[i];
        nn += fd * fd;
      }
    }
    worst_grad = std::max(worst_grad, std::sqrt(diff) / std::sqrt(std::max(na, nn)));
    ++points;
  }
  record("embedding_gradient", points == 5 && worst_grad <= 1e-4,
         "max relative error " + Fmt(worst_grad) + " over " + std::to_string(points) + " points");
  return out;
}

}  // namespace convqa
