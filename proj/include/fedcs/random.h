/*
 * Copyright 2026 The fedcs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDCS_RANDOM_H_
#define FEDCS_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fedcs {

// Engine used for every stateful random stream (client sampling, batch
// order, Gaussian noise). Each consumer owns its stream.
using Rng = std::mt19937_64;

// SplitMix64 finalizer. Bijective on 64-bit words.
uint64_t Mix64(uint64_t x);

// Counter-based generator: the i-th output depends only on (key, i), so any
// party holding the key reproduces the same stream on any platform.
class CounterPrg {
 public:
  explicit CounterPrg(uint64_t key, uint64_t stream = 0);

  uint64_t At(uint64_t counter) const;
  uint64_t Next() { return At(counter_++); }

  // Unbiased integer in [0, bound) by rejection on the high bits.
  uint64_t Below(uint64_t bound);

 private:
  uint64_t key_;
  uint64_t counter_ = 0;
};

// Sub-seed for a labeled purpose and round, so adding a consumer never
// perturbs another consumer's randomness.
uint64_t DeriveSeed(uint64_t master, std::string_view label,
                    uint64_t round = 0);

// Permutation of [0, len) by Fisher-Yates driven by CounterPrg(seed).
std::vector<size_t> SeededPermutation(size_t len, uint64_t seed);

// m distinct indices from [0, n), in draw order, driven by CounterPrg(seed).
std::vector<size_t> SeededSubset(size_t n, size_t m, uint64_t seed);

}  // namespace fedcs

#endif  // FEDCS_RANDOM_H_
