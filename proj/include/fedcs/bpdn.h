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

#ifndef FEDCS_BPDN_H_
#define FEDCS_BPDN_H_

// Basis pursuit denoising,
//
//   minimize_s  1/2 ||y - Theta s||_2^2 + lambda ||s||_1,
//
// solved per chunk with OWL-QN (orthant-wise L-BFGS). Theta is the first
// `rows` orthonormal DCT-II rows and is never materialized.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fedcs/cs_codec.h"

namespace fedcs::bpdn {

struct IterateInfo {
  size_t iteration;
  size_t stage;
  double lambda;
  double objective;
  std::span<const double> previous;
  std::span<const double> current;
  // Orthant chosen at the start of the line search (-1, 0 or +1 each).
  std::span<const signed char> orthant;
};

struct SolverOptions {
  double lambda = 0.0;
  // When set, the effective weight of a chunk is lambda * ||Theta^T y||_inf.
  bool lambda_relative = false;
  size_t memory = 10;
  size_t max_iters = 500;
  double grad_tol = 1e-6;
  double obj_rel_tol = 1e-9;
  // Warm-started continuation: solve for lambda_max * factor^k, k = 1, 2, ...
  // until the target weight is reached. Without it a tiny lambda stalls at
  // the minimum-norm least-squares point.
  bool continuation = true;
  double continuation_factor = 0.1;
  // Called after every accepted iterate. Test hook.
  std::function<void(const IterateInfo&)> observer;

  void Validate() const;
};

struct SolveReport {
  size_t iterations = 0;
  double final_objective = 0.0;
  bool converged = false;
  double residual_norm = 0.0;
  double lambda = 0.0;
  size_t stages = 0;
  // Objective of the active stage at its start point and after every
  // accepted iterate; stage k occupies [stage_begin[k], stage_begin[k+1]).
  std::vector<double> objective_trace;
  std::vector<size_t> stage_begin;
};

// 1/2 ||y - Theta s||^2 + lambda ||s||_1 with Theta sized (y.size(), s.size()).
double Objective(std::span<const double> s, std::span<const double> y,
                 double lambda);

// Minimum-norm subgradient of the L1-regularized objective.
std::vector<double> PseudoGradient(std::span<const double> s,
                                   std::span<const double> grad_smooth,
                                   double lambda);

struct ChunkSolution {
  std::vector<double> s;
  SolveReport report;
};

ChunkSolution SolveChunk(std::span<const double> y, size_t chunk_len,
                         const SolverOptions& opts);

struct Decompression {
  std::vector<double> x;
  std::vector<SolveReport> reports;  // one per chunk, in chunk order

  size_t total_iterations() const;
};

// Solves every chunk independently, concatenates, unshuffles and truncates.
Decompression Decompress(const cs::CompressedUpdate& y,
                         const SolverOptions& opts);

// Universal threshold sigma * sqrt(2 ln m) for measurements carrying iid
// Gaussian noise of standard deviation `noise_std`.
double UniversalThreshold(double noise_std, size_t m);

}  // namespace fedcs::bpdn

#endif  // FEDCS_BPDN_H_
