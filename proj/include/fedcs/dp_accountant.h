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

#ifndef FEDCS_DP_ACCOUNTANT_H_
#define FEDCS_DP_ACCOUNTANT_H_

// Moments accountant for the subsampled Gaussian mechanism with client-level
// sampling probability q and noise multiplier sigma.

#include <cstddef>
#include <vector>

#include "fedcs/random.h"

namespace fedcs::dp {

struct PrivacyParams {
  double sigma = 1.0;  // noise std divided by sensitivity
  double q = 1.0;      // per-round sampling probability
  double delta = 1e-5;
  size_t steps = 1;

  void Validate() const;
};

struct PrivacySpend {
  double epsilon = 0.0;
  int lambda_star = 0;
  double delta = 0.0;
};

// alpha(lambda | q) = log max(E1, E2) with
//   E1 = int eta0 (eta0 / eta1)^lambda,  E2 = int eta1 (eta1 / eta0)^lambda,
//   eta0 = N(0, sigma^2),  eta1 = (1 - q) N(0, sigma^2) + q N(1, sigma^2),
// evaluated by adaptive Gauss-Kronrod quadrature in log-space.
double LogMoment(int lambda, double sigma, double q);

// Caches alpha(1..lambda_max) so epsilon can be queried for any step count.
class MomentsAccountant {
 public:
  MomentsAccountant(double sigma, double q, int lambda_max = 64);

  // min over lambda of (steps * alpha(lambda) - ln delta) / lambda.
  PrivacySpend Spend(size_t steps, double delta) const;

  // (steps * alpha(lambda) - ln delta) / lambda for lambda = 1..lambda_max.
  std::vector<double> EpsilonCurve(size_t steps, double delta) const;

  const std::vector<double>& log_moments() const { return alpha_; }
  double sigma() const { return sigma_; }
  double q() const { return q_; }

 private:
  double sigma_;
  double q_;
  std::vector<double> alpha_;  // alpha_[i] = alpha(i + 1)
};

PrivacySpend EpsilonFor(const PrivacyParams& params, int lambda_max = 64);

// Smallest sigma (to 1e-4 relative) whose epsilon after `steps` rounds does
// not exceed target_epsilon.
double SigmaForEpsilon(double target_epsilon, double q, size_t steps,
                       double delta, int lambda_max = 64);

// dim iid draws from N(0, stddev^2); stddev == 0 yields zeros.
std::vector<double> GaussianVector(size_t dim, double stddev, Rng& rng);

}  // namespace fedcs::dp

#endif  // FEDCS_DP_ACCOUNTANT_H_
