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

#ifndef CONVQA_RNG_H_
#define CONVQA_RNG_H_

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "convqa/common.h"

namespace convqa {

// Seeded generator whose outputs do not depend on the standard library
// implementation. std::mt19937_64's raw sequence is fixed by the standard but
// the std distributions are not, so the helpers below are written out.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(Mix64(seed)) {}

  uint64_t Next() { return engine_(); }

  // Uniform in [0, n). n must be positive.
  uint64_t Below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [0, 1) with 53 bits of precision.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  const T& Pick(std::span<const T> items) {
    return items[Below(items.size())];
  }
  template <typename T>
  const T& Pick(const std::vector<T>& items) {
    return items[Below(items.size())];
  }

  // Index drawn proportionally to non-negative weights. Returns weights.size()
  // when every weight is zero.
  size_t Weighted(std::span<const double> weights) {
    double total = 0;
    for (double w : weights) total += w;
    if (total <= 0) return weights.size();
    double r = Uniform() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0) continue;
      if (r < weights[i]) return i;
      r -= weights[i];
    }
    for (size_t i = weights.size(); i-- > 0;) {
      if (weights[i] > 0) return i;
    }
    return weights.size();
  }

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[Below(i)]);
    }
  }

  // Standard normal via Box-Muller.
  double Gaussian() {
    double u1 = Uniform();
    while (u1 <= 0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

// Independent per-item seed derived from a base seed.
inline uint64_t DeriveSeed(uint64_t base, uint64_t index) {
  return Mix64(Mix64(base) ^ (index * 0xD1B54A32D192ED03ULL));
}

}  // namespace convqa

#endif  // CONVQA_RNG_H_
