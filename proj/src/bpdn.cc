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

#include "fedcs/bpdn.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "fedcs/error.h"

namespace fedcs::bpdn {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;
constexpr double kLambdaTol = 1e-2;

double Dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double L1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

double InfNorm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Smooth part and its gradient at s. residual = Theta s - y.
struct SmoothEval {
  double value;
  std::vector<double> residual;
  std::vector<double> grad;
};

class ChunkProblem {
 public:
  ChunkProblem(std::span<const double> y, size_t len)
      : y_(y), sensor_(len, y.size()) {}

  SmoothEval Eval(std::span<const double> s) {
    SmoothEval e{0.0, std::vector<double>(y_.size()),
                 std::vector<double>(sensor_.len())};
    sensor_.Apply(s, e.residual);
    for (size_t i = 0; i < y_.size(); ++i) e.residual[i] -= y_[i];
    e.value = 0.5 * Dot(e.residual, e.residual);
    sensor_.Adjoint(e.residual, e.grad);
    return e;
  }

  cs::ChunkSensor& sensor() { return sensor_; }
  std::span<const double> y() const { return y_; }

 private:
  std::span<const double> y_;
  cs::ChunkSensor sensor_;
};

struct Correction {
  std::vector<double> s;
  std::vector<double> y;
  double ys;
};

// d = -H * pg by the L-BFGS two-loop recursion.
std::vector<double> QuasiNewtonDirection(const std::deque<Correction>& hist,
                                         std::span<const double> pg) {
  std::vector<double> d(pg.begin(), pg.end());
  for (double& v : d) v = -v;
  std::vector<double> alpha(hist.size());
  for (size_t i = hist.size(); i-- > 0;) {
    alpha[i] = Dot(hist[i].s, d) / hist[i].ys;
    for (size_t j = 0; j < d.size(); ++j) d[j] -= alpha[i] * hist[i].y[j];
  }
  if (!hist.empty()) {
    const Correction& last = hist.back();
    const double gamma = last.ys / Dot(last.y, last.y);
    for (double& v : d) v *= gamma;
  }
  for (size_t i = 0; i < hist.size(); ++i) {
    const double beta = Dot(hist[i].y, d) / hist[i].ys;
    for (size_t j = 0; j < d.size(); ++j) {
      d[j] += (alpha[i] - beta) * hist[i].s[j];
    }
  }
  return d;
}

void CheckFinite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw NumericFailure(std::string("BPDN solver: non-finite ") + what);
  }
}

}  // namespace

void SolverOptions::Validate() const {
  if (!(lambda >= 0.0)) throw InvalidArgument("SolverOptions: lambda < 0");
  if (memory < 1) throw InvalidArgument("SolverOptions: memory < 1");
  if (max_iters < 1) throw InvalidArgument("SolverOptions: max_iters < 1");
  if (!(grad_tol > 0.0) || !(obj_rel_tol > 0.0)) {
    throw InvalidArgument("SolverOptions: tolerances must be positive");
  }
}

size_t Decompression::total_iterations() const {
  size_t total = 0;
  for (const SolveReport& r : reports) total += r.iterations;
  return total;
}

double Objective(std::span<const double> s, std::span<const double> y,
                 double lambda) {
  if (y.empty() || y.size() > s.size()) {
    throw InvalidArgument("Objective: need 1 <= y.size() <= s.size()");
  }
  cs::ChunkSensor sensor(s.size(), y.size());
  std::vector<double> r(y.size());
  sensor.Apply(s, r);
  for (size_t i = 0; i < y.size(); ++i) r[i] -= y[i];
  return 0.5 * Dot(r, r) + lambda * L1(s);
}

std::vector<double> PseudoGradient(std::span<const double> s,
                                   std::span<const double> grad_smooth,
                                   double lambda) {
  if (s.size() != grad_smooth.size()) {
    throw InvalidArgument("PseudoGradient: length mismatch");
  }
  std::vector<double> pg(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    const double g = grad_smooth[i];
    if (s[i] > 0.0) {
      pg[i] = g + lambda;
    } else if (s[i] < 0.0) {
      pg[i] = g - lambda;
    } else if (g < -lambda) {
      pg[i] = g + lambda;
    } else if (g > lambda) {
      pg[i] = g - lambda;
    } else {
      pg[i] = 0.0;
    }
  }
  return pg;
}

namespace {

struct StageState {
  std::vector<double> x;
  SmoothEval cur;
  std::deque<Correction> hist;
};

// OWL-QN on a fixed lambda, continuing from `st`. Returns true when the
// pseudo-gradient certificate holds.
bool RunStage(ChunkProblem& problem, StageState& st, double lambda, double tol,
              size_t stage, size_t iter_cap, const SolverOptions& opts,
              SolveReport& report) {
  const size_t n = st.x.size();
  std::vector<double>& x = st.x;
  double obj = st.cur.value + lambda * L1(x);
  CheckFinite(obj, "objective");
  report.stage_begin.push_back(report.objective_trace.size());
  report.objective_trace.push_back(obj);
  std::vector<double> pg = PseudoGradient(x, st.cur.grad, lambda);

  std::vector<signed char> orthant(n);
  std::vector<double> trial(n);
  bool converged = InfNorm(pg) <= tol;

  while (!converged && report.iterations < iter_cap) {
    std::vector<double> d = QuasiNewtonDirection(st.hist, pg);
    // Keep only components that descend along -pg.
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      if (d[i] * pg[i] >= 0.0) d[i] = 0.0;
      any = any || d[i] != 0.0;
    }
    if (!any) {
      st.hist.clear();
      for (size_t i = 0; i < n; ++i) d[i] = -pg[i];
    }
    for (size_t i = 0; i < n; ++i) {
      const double ref = x[i] != 0.0 ? x[i] : -pg[i];
      orthant[i] = ref > 0.0 ? 1 : (ref < 0.0 ? -1 : 0);
    }

    double step = 1.0;
    bool accepted = false;
    SmoothEval next;
    double next_obj = obj;
    for (int bt = 0; bt < kMaxBacktracks; ++bt, step *= 0.5) {
      for (size_t i = 0; i < n; ++i) {
        const double v = x[i] + step * d[i];
        trial[i] = (v * orthant[i] > 0.0) ? v : 0.0;
      }
      next = problem.Eval(trial);
      next_obj = next.value + lambda * L1(trial);
      CheckFinite(next_obj, "objective");
      double decrease = 0.0;
      for (size_t i = 0; i < n; ++i) decrease += pg[i] * (trial[i] - x[i]);
      if (next_obj <= obj + kArmijo * decrease) {
        accepted = true;
        break;
      }
    }
    if (!accepted || next_obj > obj) break;

    ++report.iterations;
    Correction c{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (size_t i = 0; i < n; ++i) {
      c.s[i] = trial[i] - x[i];
      c.y[i] = next.grad[i] - st.cur.grad[i];
    }
    c.ys = Dot(c.s, c.y);
    if (opts.observer) {
      opts.observer(IterateInfo{report.iterations, stage, lambda, next_obj, x,
                                trial, orthant});
    }
    x.swap(trial);
    st.cur = std::move(next);
    const double prev_obj = obj;
    obj = next_obj;
    report.objective_trace.push_back(obj);
    pg = PseudoGradient(x, st.cur.grad, lambda);

    // Curvature along s is ||Theta s||^2 >= 0; skip null-space steps.
    if (c.ys > 0.0 && c.ys > 1e-14 * Dot(c.y, c.y)) {
      st.hist.push_back(std::move(c));
      if (st.hist.size() > opts.memory) st.hist.pop_front();
    }

    converged = InfNorm(pg) <= tol;
    if (converged) break;
    if (prev_obj - obj <= opts.obj_rel_tol * std::abs(prev_obj)) break;
  }
  return converged;
}

// With the signs of x fixed the objective is quadratic in the nonzeros, so
// the minimizer on the current orthant face solves a small linear system.
// The face solution replaces x only if it keeps every sign and does not
// raise the objective. Returns true when the result meets the certificate.
bool Polish(ChunkProblem& problem, StageState& st, double lambda, double tol,
            SolveReport& report) {
  std::vector<double>& x = st.x;
  std::vector<size_t> support;
  for (size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) support.push_back(i);
  }
  const size_t rows = problem.y().size();
  if (support.empty() || support.size() > rows) return false;

  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd a(static_cast<Eigen::Index>(rows), k);
  std::vector<double> unit(x.size(), 0.0);
  std::vector<double> col(rows);
  Eigen::VectorXd b(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    unit[support[j]] = 1.0;
    problem.sensor().Apply(unit, col);
    unit[support[j]] = 0.0;
    a.col(j) = Eigen::Map<const Eigen::VectorXd>(col.data(), col.size());
    b(j) = Dot(col, problem.y()) - (x[support[j]] > 0.0 ? lambda : -lambda);
  }
  const Eigen::MatrixXd gram = a.transpose() * a;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Eigen::VectorXd z = ldlt.solve(b);

  std::vector<double> trial(x.size(), 0.0);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double old = x[support[j]];
    if (!std::isfinite(z(j)) || z(j) * old <= 0.0) return false;
    trial[support[j]] = z(j);
  }
  SmoothEval next = problem.Eval(trial);
  const double next_obj = next.value + lambda * L1(trial);
  const double obj = st.cur.value + lambda * L1(x);
  if (!(next_obj <= obj)) return false;

  x.swap(trial);
  st.cur = std::move(next);
  report.objective_trace.push_back(next_obj);
  return InfNorm(PseudoGradient(x, st.cur.grad, lambda)) <= tol;
}

}  // namespace

ChunkSolution SolveChunk(std::span<const double> y, size_t chunk_len,
                         const SolverOptions& opts) {
  opts.Validate();
  if (y.empty() || y.size() > chunk_len) {
    throw InvalidArgument("SolveChunk: need 1 <= rows <= chunk length");
  }
  for (double v : y) CheckFinite(v, "measurement");

  ChunkProblem problem(y, chunk_len);
  std::vector<double> aty(chunk_len);
  problem.sensor().Adjoint(y, aty);
  const double lambda_max = InfNorm(aty);

  SolveReport report;
  const double lambda =
      opts.lambda_relative ? opts.lambda * lambda_max : opts.lambda;
  report.lambda = lambda;
  // A pseudo-gradient below lambda says nothing about sparsity, so the
  // certificate is never looser than a fraction of the weight.
  const double scale_tol = opts.grad_tol * std::max(1.0, std::sqrt(Dot(y, y)));
  const double tol =
      lambda > 0.0 ? std::min(scale_tol, kLambdaTol * lambda) : scale_tol;

  StageState st;
  st.x.assign(chunk_len, 0.0);
  st.cur = problem.Eval(st.x);

  // Above lambda_max the minimizer is zero, so the schedule starts below it.
  std::vector<double> schedule;
  if (opts.continuation && opts.continuation_factor > 0.0 &&
      opts.continuation_factor < 1.0) {
    for (double l = lambda_max * opts.continuation_factor; l > lambda;
         l *= opts.continuation_factor) {
      schedule.push_back(l);
    }
  }
  schedule.push_back(lambda);

  // Intermediate stages share half of the iteration budget so the target
  // stage always gets at least the other half.
  const size_t warm = schedule.size() - 1;
  const size_t warm_cap = warm == 0 ? 0 : opts.max_iters / (2 * warm);
  bool converged = false;
  for (size_t k = 0; k < schedule.size(); ++k) {
    const bool last = k + 1 == schedule.size();
    if (!last && warm_cap == 0) continue;
    // Intermediate stages only need to identify the support.
    const double stage_tol =
        last ? tol : std::max(tol, kLambdaTol * schedule[k]);
    const size_t cap =
        last ? opts.max_iters : report.iterations + warm_cap;
    converged =
        RunStage(problem, st, schedule[k], stage_tol, k, cap, opts, report);
  }
  if (Polish(problem, st, lambda, tol, report)) converged = true;
  report.stages = report.stage_begin.size();
  report.converged = converged;
  report.final_objective = st.cur.value + lambda * L1(st.x);
  report.residual_norm = std::sqrt(Dot(st.cur.residual, st.cur.residual));
  return ChunkSolution{std::move(st.x), std::move(report)};
}

Decompression Decompress(const cs::CompressedUpdate& y,
                         const SolverOptions& opts) {
  const cs::SensingConfig& cfg = y.cfg;
  cfg.Validate();
  if (y.coeffs.size() != cfg.m) {
    throw InvalidArgument("Decompress: coefficient count != m");
  }
  const size_t len = cfg.chunk_len();
  Decompression out;
  out.reports.reserve(cfg.chunks);
  std::vector<double> shuffled(cfg.n_padded);
  for (size_t j = 0; j < cfg.chunks; ++j) {
    ChunkSolution sol = SolveChunk(y.chunk(j), len, opts);
    std::copy(sol.s.begin(), sol.s.end(), shuffled.begin() + j * len);
    out.reports.push_back(std::move(sol.report));
  }
  out.x = cs::Unshuffle(shuffled, cfg.shuffle_seed);
  out.x.resize(cfg.n);
  return out;
}

double UniversalThreshold(double noise_std, size_t m) {
  if (m < 1) throw InvalidArgument("UniversalThreshold: m must be >= 1");
  const double log_m = std::log(static_cast<double>(std::max<size_t>(m, 2)));
  return noise_std * std::sqrt(2.0 * log_m);
}

}  // namespace fedcs::bpdn
