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


#include "fedcs/secure_agg.h"

#include <bit>
#include <cmath>
#include <string>

#include "fedcs/error.h"
#include "fedcs/random.h"

namespace fedcs::secagg {

void RingParams::Validate() const {
  if (p < 2 || !std::has_single_bit(p)) {
    throw InvalidArgument("RingParams: p must be a power of two >= 2");
  }
  if (frac_bits < 0 || frac_bits > 52) {
    throw InvalidArgument("RingParams: frac_bits must lie in [0, 52]");
  }
  // Residues are re-centered through int64, so the ring must fit in 63 bits.
  if (std::bit_width(p) - 1 + frac_bits > 63) {
    throw InvalidArgument("RingParams: p * 2^frac_bits exceeds 63 bits, "
                          "use smaller frac_bits");
  }
}

RingParams DeriveModulus(double max_abs, size_t num_clients, int frac_bits) {
  if (!(max_abs > 0.0) || !std::isfinite(max_abs)) {
    throw InvalidArgument("DeriveModulus: max_abs must be > 0");
  }
  if (num_clients < 1) {
    throw InvalidArgument("DeriveModulus: num_clients must be >= 1");
  }
  const double bound = max_abs * static_cast<double>(num_clients);
  const double e = std::max(1.0, std::ceil(std::log2(bound)));
  if (e + frac_bits > 63) {
    throw InvalidArgument("DeriveModulus: p * 2^frac_bits exceeds 63 bits (p = 2^" +
                          std::to_string(static_cast<int>(e)) +
                          "), use smaller frac_bits");
  }
  RingParams ring;
  ring.p = uint64_t{1} << static_cast<int>(e);
  ring.frac_bits = frac_bits;
  ring.Validate();
  return ring;
}

std::vector<std::vector<uint64_t>> GenMasks(size_t num_clients, size_t dim,
                                            const RingParams& ring,
                                            uint64_t mask_seed) {
  ring.Validate();
  if (num_clients < 1) {
    throw InvalidArgument("GenMasks: num_clients must be >= 1");
  }
  const uint64_t mask = ring.mask();
  std::vector<std::vector<uint64_t>> out(num_clients,
                                         std::vector<uint64_t>(dim, 0));
  std::vector<uint64_t> partial(dim, 0);
  for (size_t k = 0; k + 1 < num_clients; ++k) {
    CounterPrg prg(mask_seed, k);
    for (size_t i = 0; i < dim; ++i) {
      out[k][i] = prg.Next() & mask;
      partial[i] = (partial[i] + out[k][i]) & mask;
    }
  }
  for (size_t i = 0; i < dim; ++i) {
    out.back()[i] = (ring.modulus() - partial[i]) & mask;
  }
  return out;
}

int64_t Encode(double v, const RingParams& ring) {
  return std::llround(v * static_cast<double>(ring.scale()));
}

MaskedVector Encrypt(std::span<const double> v, std::span<const uint64_t> mask,
                     const RingParams& ring) {
  ring.Validate();
  if (mask.size() != v.size()) {
    throw InvalidArgument("Encrypt: mask length " + std::to_string(mask.size()) +
                          " != vector length " + std::to_string(v.size()));
  }
  const double half = static_cast<double>(ring.p) / 2.0;
  MaskedVector out;
  out.ring = ring;
  out.residues.resize(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!(std::abs(v[i]) < half)) {
      throw RangeError("Encrypt: |v[" + std::to_string(i) + "]| = " +
                       std::to_string(std::abs(v[i])) + " >= p/2 = " +
                       std::to_string(half));
    }
    const uint64_t enc = static_cast<uint64_t>(Encode(v[i], ring));
    out.residues[i] = (enc + mask[i]) & ring.mask();
  }
  return out;
}

std::vector<uint64_t> SumResidues(std::span<const MaskedVector> masked) {
  if (masked.empty()) throw ProtocolError("aggregate: no shares");
  const RingParams& ring = masked.front().ring;
  const size_t dim = masked.front().residues.size();
  std::vector<uint64_t> sum(dim, 0);
  for (const MaskedVector& mv : masked) {
    if (!(mv.ring == ring)) throw InvalidArgument("aggregate: ring mismatch");
    if (mv.residues.size() != dim) {
      throw InvalidArgument("aggregate: dimension mismatch");
    }
    for (size_t i = 0; i < dim; ++i) {
      sum[i] = (sum[i] + mv.residues[i]) & ring.mask();
    }
  }
  return sum;
}

std::vector<int64_t> AggregateFixed(std::span<const MaskedVector> masked,
                                    size_t expected_shares) {
  if (masked.size() != expected_shares) {
    throw ProtocolError("aggregate: got " + std::to_string(masked.size()) +
                        " shares, expected " + std::to_string(expected_shares));
  }
  const std::vector<uint64_t> sum = SumResidues(masked);
  const uint64_t modulus = masked.front().ring.modulus();
  const uint64_t half = modulus / 2;
  std::vector<int64_t> out(sum.size());
  for (size_t i = 0; i < sum.size(); ++i) {
    out[i] = sum[i] >= half ? -static_cast<int64_t>(modulus - sum[i])
                            : static_cast<int64_t>(sum[i]);
  }
  return out;
}

std::vector<double> Aggregate(std::span<const MaskedVector> masked,
                              size_t expected_shares) {
  const std::vector<int64_t> fixed = AggregateFixed(masked, expected_shares);
  const double scale = static_cast<double>(masked.front().ring.scale());
  std::vector<double> out(fixed.size());
  for (size_t i = 0; i < fixed.size(); ++i) {
    out[i] = static_cast<double>(fixed[i]) / scale;
  }
  return out;
}

}  // namespace fedcs::secagg
