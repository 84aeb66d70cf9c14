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


#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fedcs/bpdn.h"
#include "fedcs/cs_codec.h"
#include "fedcs/error.h"
#include "fedcs/random.h"

namespace fedcs::bpdn {
namespace {

double RelErr(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

std::vector<double> Planted(size_t n, size_t k, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n, 0.0);
  for (size_t i : SeededSubset(n, k, rng())) x[i] = (rng() & 1) ? 1.0 : -1.0;
  return x;
}

std::vector<double> Measure(const std::vector<double>& s, size_t rows) {
  cs::ChunkSensor op(s.size(), rows);
  std::vector<double> y(rows);
  op.Apply(s, y);
  return y;
}

// Wraps the options with an observer asserting monotone objectives and
// orthant consistency on every accepted iterate.
SolverOptions Checked(SolverOptions opts, int* violations) {
  opts.observer = [violations, last = std::vector<double>{},
                   stage = size_t{0}](const IterateInfo& info) mutable {
    for (size_t i = 0; i < info.current.size(); ++i) {
      if (info.current[i] * info.orthant[i] < 0.0) ++*violations;
      if (info.orthant[i] == 0 && info.current[i] != 0.0) ++*violations;
    }
    if (!last.empty() && stage == info.stage && info.objective > last[0]) {
      ++*violations;
    }
    last = {info.objective};
    stage = info.stage;
  };
  return opts;
}

TEST(Objective, Basics) {
  EXPECT_EQ(Objective(std::vector<double>(4, 0.0), std::vector<double>(2, 0.0),
                      3.0),
            0.0);
  const std::vector<double> y = {1.0, -2.0};
  EXPECT_NEAR(Objective(std::vector<double>(4, 0.0), y, 1.0), 2.5, 1e-15);
  EXPECT_NEAR(Objective(std::vector<double>{1, 1, 1, 1},
                        std::vector<double>{2, 0, 0, 0}, 1.0),
              4.0, 1e-12);
  EXPECT_THROW(Objective(std::vector<double>(2), std::vector<double>(3), 1.0),
               InvalidArgument);
}

TEST(PseudoGradient, Branches) {
  EXPECT_NEAR(PseudoGradient(std::vector<double>{1.0},
                             std::vector<double>{0.2}, 0.5)[0],
              0.7, 1e-15);
  EXPECT_EQ(PseudoGradient(std::vector<double>{0.0}, std::vector<double>{0.2},
                           0.5)[0],
            0.0);
  EXPECT_NEAR(PseudoGradient(std::vector<double>{0.0},
                             std::vector<double>{-0.9}, 0.5)[0],
              -0.4, 1e-15);
  EXPECT_NEAR(PseudoGradient(std::vector<double>{0.0},
                             std::vector<double>{0.9}, 0.5)[0],
              0.4, 1e-15);
  EXPECT_NEAR(PseudoGradient(std::vector<double>{-2.0},
                             std::vector<double>{0.1}, 0.5)[0],
              -0.4, 1e-15);
}

TEST(SolveChunk, ZeroMeasurements) {
  SolverOptions opts;
  opts.lambda = 0.1;
  const ChunkSolution sol = SolveChunk(std::vector<double>(8, 0.0), 16, opts);
  for (double v : sol.s) EXPECT_EQ(v, 0.0);
  EXPECT_LE(sol.report.iterations, 1u);
  EXPECT_TRUE(sol.report.converged);
}

TEST(SolveChunk, SquareSoftThreshold) {
  SolverOptions opts;
  opts.lambda = 0.5;
  const std::vector<double> s0 = {2, 0, 0, 0};
  const ChunkSolution sol = SolveChunk(Measure(s0, 4), 4, opts);
  EXPECT_NEAR(sol.s[0], 1.5, 1e-6);
  for (size_t i = 1; i < 4; ++i) EXPECT_NEAR(sol.s[i], 0.0, 1e-6);
}

TEST(SolveChunk, SoftThresholdEquivalenceRandom) {
  int violations = 0;
  for (uint64_t t = 0; t < 100; ++t) {
    Rng rng(t);
    std::normal_distribution<double> g(0.0, 1.0);
    const size_t L = 8 + t % 57;
    std::vector<double> y(L);
    for (double& v : y) v = g(rng);
    SolverOptions opts = Checked(SolverOptions{}, &violations);
    opts.lambda = 0.1 + 0.01 * (t % 50);
    const ChunkSolution sol = SolveChunk(y, L, opts);
    std::vector<double> aty(L);
    cs::ChunkSensor(L, L).Adjoint(y, aty);
    for (size_t i = 0; i < L; ++i) {
      const double want =
          std::copysign(std::max(0.0, std::abs(aty[i]) - opts.lambda), aty[i]);
      ASSERT_NEAR(sol.s[i], want, 1e-6) << "trial " << t << " coord " << i;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(SolveChunk, NoiselessSparseRecovery) {
  int violations = 0;
  int recovered = 0;
  for (uint64_t t = 0; t < 20; ++t) {
    const auto s0 = Planted(64, 3, 500 + t);
    SolverOptions opts = Checked(SolverOptions{}, &violations);
    opts.lambda = 1e-6;
    const ChunkSolution sol = SolveChunk(Measure(s0, 32), 64, opts);
    if (RelErr(sol.s, s0) <= 1e-3) ++recovered;
  }
  // The low-pass rows are not a random design; see README for the rate.
  EXPECT_GE(recovered, 18);
  EXPECT_EQ(violations, 0);
}

TEST(SolveChunk, CertificateAtConvergence) {
  const auto s0 = Planted(128, 5, 3);
  const auto y = Measure(s0, 64);
  SolverOptions opts;
  opts.lambda = 1e-2;
  opts.max_iters = 5000;
  const ChunkSolution sol = SolveChunk(y, 128, opts);
  ASSERT_TRUE(sol.report.converged);
  cs::ChunkSensor op(128, 64);
  std::vector<double> r(64), grad(128);
  op.Apply(sol.s, r);
  for (size_t i = 0; i < 64; ++i) r[i] -= y[i];
  op.Adjoint(r, grad);
  const auto pg = PseudoGradient(sol.s, grad, opts.lambda);
  double ynorm = 0;
  for (double v : y) ynorm += v * v;
  double inf = 0;
  for (double v : pg) inf = std::max(inf, std::abs(v));
  EXPECT_LE(inf, opts.grad_tol * std::max(1.0, std::sqrt(ynorm)));
}

TEST(SolveChunk, ObjectiveTraceMonotoneWithinStages) {
  const auto s0 = Planted(256, 10, 9);
  SolverOptions opts;
  opts.lambda = 1e-4;
  const ChunkSolution sol = SolveChunk(Measure(s0, 100), 256, opts);
  const auto& tr = sol.report.objective_trace;
  const auto& sb = sol.report.stage_begin;
  ASSERT_FALSE(sb.empty());
  for (size_t k = 0; k < sb.size(); ++k) {
    const size_t end = k + 1 < sb.size() ? sb[k + 1] : tr.size();
    for (size_t i = sb[k] + 1; i < end; ++i) EXPECT_LE(tr[i], tr[i - 1]);
  }
  EXPECT_GE(sol.report.final_objective, 0.0);
  EXPECT_GE(sol.report.residual_norm, 0.0);
}

TEST(SolveChunk, NonConvergenceIsReported) {
  const auto s0 = Planted(256, 30, 4);
  SolverOptions opts;
  opts.lambda = 1e-8;
  opts.max_iters = 3;
  const ChunkSolution sol = SolveChunk(Measure(s0, 100), 256, opts);
  EXPECT_FALSE(sol.report.converged);
  EXPECT_LE(sol.report.iterations, 3u);
}

TEST(SolveChunk, RejectsNonFinite) {
  std::vector<double> y = {1.0, NAN};
  EXPECT_THROW(SolveChunk(y, 4, SolverOptions{}), NumericFailure);
}

TEST(SolveChunk, OptionValidation) {
  SolverOptions opts;
  opts.lambda = -1;
  EXPECT_THROW(SolveChunk(std::vector<double>{1.0}, 2, opts), InvalidArgument);
  opts = SolverOptions{};
  opts.memory = 0;
  EXPECT_THROW(opts.Validate(), InvalidArgument);
}

TEST(Decompress, ZeroVector) {
  const auto cfg = cs::SensingConfig::Make(100, 40, 4, 1);
  const auto y = cs::Compress(std::vector<double>(100, 0.0), cfg);
  for (double v : Decompress(y, SolverOptions{}).x) EXPECT_EQ(v, 0.0);
}

TEST(Decompress, NoiselessPlanted) {
  const auto cfg = cs::SensingConfig::Make(256, 128, 4, 21);
  int good = 0;
  for (uint64_t t = 0; t < 10; ++t) {
    const auto x = Planted(256, 8, 900 + t);
    SolverOptions opts;
    opts.lambda = 1e-6;
    opts.lambda_relative = true;
    opts.max_iters = 2000;
    const auto rec = Decompress(cs::Compress(x, cfg), opts);
    ASSERT_EQ(rec.x.size(), 256u);
    ASSERT_EQ(rec.reports.size(), 4u);
    if (RelErr(rec.x, x) <= 1e-2) ++good;
  }
  // Low-pass rows miss some spike patterns even for an exact l1 solver.
  EXPECT_GE(good, 8);
}

TEST(Decompress, NoisyPlanted) {
  const auto cfg = cs::SensingConfig::Make(256, 128, 4, 21);
  const double noise = 0.01;
  int good = 0;
  for (uint64_t t = 0; t < 10; ++t) {
    const auto x = Planted(256, 8, 900 + t);
    auto y = cs::Compress(x, cfg);
    Rng rng(t);
    std::normal_distribution<double> g(0.0, noise);
    for (double& v : y.coeffs) v += g(rng);
    SolverOptions opts;
    opts.lambda = UniversalThreshold(noise, cfg.rows_per_chunk());
    opts.max_iters = 2000;
    if (RelErr(Decompress(y, opts).x, x) <= 0.1) ++good;
  }
  EXPECT_GE(good, 8);
}

TEST(UniversalThreshold, Formula) {
  EXPECT_NEAR(UniversalThreshold(1.0, 100), std::sqrt(2 * std::log(100.0)),
              1e-15);
  EXPECT_EQ(UniversalThreshold(0.0, 10), 0.0);
}

}  // namespace
}  // namespace fedcs::bpdn
