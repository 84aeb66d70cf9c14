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

#include "fedcs/cs_codec.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedcs/error.h"
#include "fedcs/random.h"

namespace fedcs::cs {

SensingConfig SensingConfig::Make(size_t n, size_t m, size_t chunks,
                                  uint64_t shuffle_seed) {
  if (chunks == 0) throw InvalidArgument("SensingConfig: chunks must be >= 1");
  SensingConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.chunks = chunks;
  cfg.n_padded = (n + chunks - 1) / chunks * chunks;
  cfg.shuffle_seed = shuffle_seed;
  cfg.Validate();
  return cfg;
}

SensingConfig SensingConfig::FromRatio(size_t n, double ratio, size_t chunks,
                                       uint64_t shuffle_seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("SensingConfig: ratio must lie in (0, 1]");
  }
  if (chunks == 0 || n == 0) {
    throw InvalidArgument("SensingConfig: n and chunks must be >= 1");
  }
  const size_t n_padded = (n + chunks - 1) / chunks * chunks;
  const size_t per_chunk_len = n_padded / chunks;
  size_t per_chunk = static_cast<size_t>(
      std::llround(ratio * static_cast<double>(n_padded) / chunks));
  per_chunk = std::clamp<size_t>(per_chunk, 1, per_chunk_len);
  return Make(n, per_chunk * chunks, chunks, shuffle_seed);
}

void SensingConfig::Validate() const {
  if (n == 0) throw InvalidArgument("SensingConfig: n must be >= 1");
  if (chunks == 0) throw InvalidArgument("SensingConfig: chunks must be >= 1");
  if (n_padded < n || n_padded % chunks != 0 || n_padded - n >= chunks) {
    throw InvalidArgument("SensingConfig: n_padded is not the padded length");
  }
  if (m < 1 || m > n_padded) {
    throw InvalidArgument("SensingConfig: need 1 <= m <= n_padded, got m=" +
                          std::to_string(m));
  }
  if (m % chunks != 0) {
    throw InvalidArgument("SensingConfig: chunks must divide m");
  }
}

std::vector<double> Shuffle(std::span<const double> x, uint64_t seed) {
  const std::vector<size_t> perm = SeededPermutation(x.size(), seed);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = x[perm[i]];
  return out;
}

std::vector<double> Unshuffle(std::span<const double> x, uint64_t seed) {
  const std::vector<size_t> perm = SeededPermutation(x.size(), seed);
  std::vector<double> out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[perm[i]] = x[i];
  return out;
}

CompressedUpdate Compress(std::span<const double> x, const SensingConfig& cfg) {
  cfg.Validate();
  if (x.size() != cfg.n) {
    throw InvalidArgument("Compress: vector length " + std::to_string(x.size()) +
                          " does not match n=" + std::to_string(cfg.n));
  }
  std::vector<double> padded(cfg.n_padded, 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  const std::vector<double> shuffled = Shuffle(padded, cfg.shuffle_seed);

  const size_t len = cfg.chunk_len();
  const size_t rows = cfg.rows_per_chunk();
  CompressedUpdate y{std::vector<double>(cfg.m), cfg};
  std::vector<double> full(len);
  for (size_t j = 0; j < cfg.chunks; ++j) {
    DctForwardInto(std::span<const double>(shuffled).subspan(j * len, len),
                   full);
    std::copy_n(full.begin(), rows, y.coeffs.begin() + j * rows);
  }
  return y;
}

std::vector<double> LowpassReconstruct(const CompressedUpdate& y) {
  const SensingConfig& cfg = y.cfg;
  cfg.Validate();
  if (y.coeffs.size() != cfg.m) {
    throw InvalidArgument("LowpassReconstruct: coefficient count != m");
  }
  const size_t len = cfg.chunk_len();
  const size_t rows = cfg.rows_per_chunk();
  std::vector<double> shuffled(cfg.n_padded);
  std::vector<double> spectrum(len);
  for (size_t j = 0; j < cfg.chunks; ++j) {
    std::fill(spectrum.begin(), spectrum.end(), 0.0);
    std::copy_n(y.coeffs.begin() + j * rows, rows, spectrum.begin());
    DctInverseInto(spectrum,
                   std::span<double>(shuffled).subspan(j * len, len));
  }
  std::vector<double> x = Unshuffle(shuffled, cfg.shuffle_seed);
  x.resize(cfg.n);
  return x;
}

ChunkSensor::ChunkSensor(size_t len, size_t rows)
    : len_(len), rows_(rows), work_(len) {
  if (len == 0 || rows == 0 || rows > len) {
    throw InvalidArgument("ChunkSensor: need 1 <= rows <= len");
  }
}

void ChunkSensor::Apply(std::span<const double> s, std::span<double> out) {
  if (s.size() != len_ || out.size() != rows_) {
    throw InvalidArgument("ChunkSensor::Apply: dimension mismatch");
  }
  DctForwardInto(s, work_);
  std::copy_n(work_.begin(), rows_, out.begin());
}

void ChunkSensor::Adjoint(std::span<const double> r, std::span<double> out) {
  if (r.size() != rows_ || out.size() != len_) {
    throw InvalidArgument("ChunkSensor::Adjoint: dimension mismatch");
  }
  std::fill(work_.begin(), work_.end(), 0.0);
  std::copy(r.begin(), r.end(), work_.begin());
  DctInverseInto(work_, out);
}

}  // namespace fedcs::cs
