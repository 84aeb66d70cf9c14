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

#include "fedcs/random.h"

#include <numeric>
#include <utility>

#include "fedcs/error.h"

namespace fedcs {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid-argument";
    case ErrorCode::kNumericFailure:
      return "numeric-failure";
    case ErrorCode::kRange:
      return "range-error";
    case ErrorCode::kProtocol:
      return "protocol-error";
    case ErrorCode::kFormat:
      return "format-error";
    case ErrorCode::kIo:
      return "io-error";
  }
  return "error";
}

uint64_t Mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

CounterPrg::CounterPrg(uint64_t key, uint64_t stream)
    : key_(Mix64(key ^ Mix64(stream + 0x632be59bd9b4e019ULL))) {}

uint64_t CounterPrg::At(uint64_t counter) const {
  // Two rounds keep adjacent counters decorrelated.
  return Mix64(Mix64(counter ^ key_) + key_);
}

uint64_t CounterPrg::Below(uint64_t bound) {
  if (bound == 0) throw InvalidArgument("CounterPrg::Below: bound is zero");
  if ((bound & (bound - 1)) == 0) return Next() & (bound - 1);
  // Largest multiple of bound representable; reject above it.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const uint64_t v = Next();
    if (v < limit) return v % bound;
  }
}

uint64_t DeriveSeed(uint64_t master, std::string_view label, uint64_t round) {
  // FNV-1a over the label, then mixed with the master seed and round.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return Mix64(Mix64(master ^ h) ^ Mix64(round + 0x7f4a7c159e3779b9ULL));
}

std::vector<size_t> SeededPermutation(size_t len, uint64_t seed) {
  std::vector<size_t> perm(len);
  std::iota(perm.begin(), perm.end(), size_t{0});
  CounterPrg prg(seed);
  for (size_t i = len; i > 1; --i) {
    const size_t j = static_cast<size_t>(prg.Below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::vector<size_t> SeededSubset(size_t n, size_t m, uint64_t seed) {
  if (m > n) throw InvalidArgument("SeededSubset: m exceeds n");
  // Partial Fisher-Yates: the first m slots of a shuffled identity.
  std::vector<size_t> pool(n);
  std::iota(pool.begin(), pool.end(), size_t{0});
  CounterPrg prg(seed, 1);
  std::vector<size_t> out(m);
  for (size_t i = 0; i < m; ++i) {
    const size_t j = i + static_cast<size_t>(prg.Below(n - i));
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  return out;
}

}  // namespace fedcs
