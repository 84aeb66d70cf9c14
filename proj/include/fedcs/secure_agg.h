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


#ifndef FEDCS_SECURE_AGG_H_
#define FEDCS_SECURE_AGG_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedcs::secagg {

// Fixed-point ring Z_{p * 2^frac_bits}. p is a power of two, so the ring
// modulus is one too and reduction is a mask.
struct RingParams {
  uint64_t p = 2;
  int frac_bits = 20;

  uint64_t scale() const { return uint64_t{1} << frac_bits; }
  uint64_t modulus() const { return p << frac_bits; }
  uint64_t mask() const { return modulus() - 1; }

  void Validate() const;

  bool operator==(const RingParams&) const = default;
};

struct MaskedVector {
  std::vector<uint64_t> residues;
  RingParams ring;
};

// p = 2^ceil(log2(max_abs * num_clients)), at least 2.
RingParams DeriveModulus(double max_abs, size_t num_clients,
                         int frac_bits = 20);

// Masks for k < num_clients - 1 come from a counter PRG keyed by mask_seed;
// the last one cancels their sum.
std::vector<std::vector<uint64_t>> GenMasks(size_t num_clients, size_t dim,
                                            const RingParams& ring,
                                            uint64_t mask_seed);

int64_t Encode(double v, const RingParams& ring);

MaskedVector Encrypt(std::span<const double> v, std::span<const uint64_t> mask,
                     const RingParams& ring);

// Raw residue sum mod p * scale, before re-centering.
std::vector<uint64_t> SumResidues(std::span<const MaskedVector> masked);

// Signed fixed-point sum. expected_shares is the size of the participating
// set; anything else means masks cannot cancel.
std::vector<int64_t> AggregateFixed(std::span<const MaskedVector> masked,
                                    size_t expected_shares);

std::vector<double> Aggregate(std::span<const MaskedVector> masked,
                              size_t expected_shares);

}  // namespace fedcs::secagg

#endif  // FEDCS_SECURE_AGG_H_
