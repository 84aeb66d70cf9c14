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

#ifndef FEDCS_CS_CODEC_H_
#define FEDCS_CS_CODEC_H_

// Linear compression of update vectors: zero-pad, shuffle with a shared seed,
// split into equal chunks and keep the lowest-frequency orthonormal DCT-II
// coefficients of every chunk.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedcs::cs {

// Orthonormal DCT-II. O(L log L) for every length L >= 1.
std::vector<double> DctForward(std::span<const double> x);

// Orthonormal DCT-III, the exact inverse (and transpose) of DctForward.
std::vector<double> DctInverse(std::span<const double> c);

// Same transforms writing into a caller-owned buffer of equal length.
void DctForwardInto(std::span<const double> x, std::span<double> out);
void DctInverseInto(std::span<const double> c, std::span<double> out);

struct SensingConfig {
  size_t n = 0;         // original vector length
  size_t m = 0;         // total measurements
  size_t chunks = 1;    // P
  size_t n_padded = 0;  // smallest multiple of P >= n
  uint64_t shuffle_seed = 0;

  // Validates and fills n_padded. Throws InvalidArgument on violations.
  static SensingConfig Make(size_t n, size_t m, size_t chunks,
                            uint64_t shuffle_seed);

  // m = P * max(1, round(ratio * n_padded / P)), clamped to n_padded.
  static SensingConfig FromRatio(size_t n, double ratio, size_t chunks,
                                 uint64_t shuffle_seed);

  size_t chunk_len() const { return n_padded / chunks; }
  size_t rows_per_chunk() const { return m / chunks; }
  double ratio() const { return static_cast<double>(m) / n; }

  void Validate() const;

  bool operator==(const SensingConfig&) const = default;
};

struct CompressedUpdate {
  std::vector<double> coeffs;
  SensingConfig cfg;

  std::span<const double> chunk(size_t j) const {
    const size_t k = cfg.rows_per_chunk();
    return std::span<const double>(coeffs).subspan(j * k, k);
  }
};

// out[i] = x[perm[i]] where perm = SeededPermutation(len, seed).
std::vector<double> Shuffle(std::span<const double> x, uint64_t seed);
std::vector<double> Unshuffle(std::span<const double> x, uint64_t seed);

CompressedUpdate Compress(std::span<const double> x, const SensingConfig& cfg);

// Zero-fills the discarded coefficients, inverts every chunk, unshuffles and
// truncates the padding. Exact inverse of Compress when m == n_padded.
std::vector<double> LowpassReconstruct(const CompressedUpdate& y);

// Matrix-free chunk sensing operator: the first `rows` orthonormal DCT-II
// coefficients of a length-`len` signal, and its adjoint.
class ChunkSensor {
 public:
  ChunkSensor(size_t len, size_t rows);

  size_t len() const { return len_; }
  size_t rows() const { return rows_; }

  // out (length rows) = Theta * s
  void Apply(std::span<const double> s, std::span<double> out);
  // out (length len) = Theta^T * r
  void Adjoint(std::span<const double> r, std::span<double> out);

 private:
  size_t len_;
  size_t rows_;
  std::vector<double> work_;
};

}  // namespace fedcs::cs

#endif  // FEDCS_CS_CODEC_H_
