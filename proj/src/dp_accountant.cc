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

#include "fedcs/dp_accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedcs/error.h"

namespace fedcs::dp {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double LogAddExp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (QUADPACK qk15).
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
void Kronrod15(const F& f, double a, double b, double* kronrod,
               double* gauss) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double k = kWgk[7] * fc;
  double g = kWg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double sum = f(c - h * kXgk[j]) + f(c + h * kXgk[j]);
    k += kWgk[j] * sum;
    if (j % 2 == 1) g += kWg[j / 2] * sum;
  }
  *kronrod = k * h;
  *gauss = g * h;
}

// Bisects until |K15 - G7| <= density * (b - a), or the difference is at
// round-off level of the interval's own contribution.
template <typename F>
double AdaptiveKronrod(const F& f, double a, double b, double density,
                       int depth, double* err) {
  double k = 0.0;
  double g = 0.0;
  Kronrod15(f, a, b, &k, &g);
  const double e = std::abs(k - g);
  if (e <= density * (b - a) || e <= 1e-14 * std::abs(k) || depth == 0) {
    *err += e;
    return k;
  }
  const double mid = 0.5 * (a + b);
  return AdaptiveKronrod(f, a, mid, density, depth - 1, err) +
         AdaptiveKronrod(f, mid, b, density, depth - 1, err);
}

// Integrates exp(log_f) over [lo, hi] and returns the log of the integral.
// The range is cut into panels narrower than the Gaussian scale so no panel
// misses a peak, and the integrand is rescaled by its maximum over a dense
// grid so the sum cannot overflow.
template <typename LogF>
double LogIntegral(const LogF& log_f, double lo, double hi, double width) {
  const size_t panels =
      std::max<size_t>(1, static_cast<size_t>(std::ceil((hi - lo) / width)));
  const double h = (hi - lo) / panels;
  double peak = -std::numeric_limits<double>::infinity();
  const size_t grid = panels * 16;
  for (size_t i = 0; i <= grid; ++i) {
    peak = std::max(peak, log_f(lo + (hi - lo) * i / grid));
  }
  if (!std::isfinite(peak)) {
    throw NumericFailure("log-moment integrand is not finite");
  }
  auto f = [&](double x) { return std::exp(log_f(x) - peak); };

  // Coarse pass fixes the mass scale for the absolute tolerance.
  double mass = 0.0;
  for (size_t p = 0; p < panels; ++p) {
    double k = 0.0;
    double g = 0.0;
    Kronrod15(f, lo + p * h, lo + (p + 1) * h, &k, &g);
    mass += k;
  }
  if (!(mass > 0.0)) throw NumericFailure("log-moment integral vanished");

  const double density = 1e-11 * mass / (hi - lo);
  double total = 0.0;
  double total_err = 0.0;
  for (size_t p = 0; p < panels; ++p) {
    total += AdaptiveKronrod(f, lo + p * h, lo + (p + 1) * h, density, 20,
                             &total_err);
  }
  if (!std::isfinite(total) || total_err > 1e-10 * total) {
    throw NumericFailure("log-moment quadrature did not converge");
  }
  return peak + std::log(total);
}

}  // namespace

void PrivacyParams::Validate() const {
  if (!(sigma > 0.0)) throw InvalidArgument("PrivacyParams: sigma must be > 0");
  if (!(q > 0.0 && q <= 1.0)) {
    throw InvalidArgument("PrivacyParams: q must lie in (0, 1]");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("PrivacyParams: delta must lie in (0, 1)");
  }
  if (steps < 1) throw InvalidArgument("PrivacyParams: steps must be >= 1");
}

double LogMoment(int lambda, double sigma, double q) {
  if (lambda < 1) throw InvalidArgument("LogMoment: lambda must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("LogMoment: sigma must be > 0");
  }
  if (!(q > 0.0 && q <= 1.0)) {
    throw InvalidArgument("LogMoment: q must lie in (0, 1]");
  }
  const double var2 = 2.0 * sigma * sigma;
  const double log_1mq =
      q < 1.0 ? std::log1p(-q) : -std::numeric_limits<double>::infinity();
  const double log_q = std::log(q);
  auto log_eta0 = [&](double x) {
    return -x * x / var2 - std::log(sigma) - kLogSqrt2Pi;
  };
  // log(eta1 / eta0) = log((1 - q) + q exp((2x - 1) / (2 sigma^2)))
  auto log_ratio = [&](double x) {
    return LogAddExp(log_1mq, log_q + (2.0 * x - 1.0) / var2);
  };
  const double lam = lambda;
  // E2 is a mixture of N(k, sigma^2), k = 0..lambda+1; at q = 1 the E1 mass
  // sits near -lambda. Both are covered with a 12-sigma tail margin.
  const double margin = sigma * (std::sqrt(2.0 * lam) + 12.0);
  const double lo = -(lam + 1.0) - margin;
  const double hi = (lam + 1.0) + margin;
  const double width = std::min(sigma, 1.0);

  const double log_e1 = LogIntegral(
      [&](double x) { return log_eta0(x) - lam * log_ratio(x); }, lo, hi,
      width);
  const double log_e2 = LogIntegral(
      [&](double x) { return log_eta0(x) + (lam + 1.0) * log_ratio(x); }, lo,
      hi, width);
  return std::max(log_e1, log_e2);
}

MomentsAccountant::MomentsAccountant(double sigma, double q, int lambda_max)
    : sigma_(sigma), q_(q) {
  if (lambda_max < 1) {
    throw InvalidArgument("MomentsAccountant: lambda_max must be >= 1");
  }
  alpha_.reserve(lambda_max);
  for (int l = 1; l <= lambda_max; ++l) alpha_.push_back(LogMoment(l, sigma, q));
}

std::vector<double> MomentsAccountant::EpsilonCurve(size_t steps,
                                                    double delta) const {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgument("delta must lie in (0, 1)");
  }
  std::vector<double> eps(alpha_.size());
  const double log_delta = std::log(delta);
  for (size_t i = 0; i < alpha_.size(); ++i) {
    eps[i] = (static_cast<double>(steps) * alpha_[i] - log_delta) /
             static_cast<double>(i + 1);
  }
  return eps;
}

PrivacySpend MomentsAccountant::Spend(size_t steps, double delta) const {
  const std::vector<double> eps = EpsilonCurve(steps, delta);
  const auto it = std::min_element(eps.begin(), eps.end());
  PrivacySpend out;
  out.epsilon = std::max(0.0, *it);
  out.lambda_star = static_cast<int>(it - eps.begin()) + 1;
  out.delta = delta;
  return out;
}

PrivacySpend EpsilonFor(const PrivacyParams& params, int lambda_max) {
  params.Validate();
  return MomentsAccountant(params.sigma, params.q, lambda_max)
      .Spend(params.steps, params.delta);
}

double SigmaForEpsilon(double target_epsilon, double q, size_t steps,
                       double delta, int lambda_max) {
  if (!(target_epsilon > 0.0)) {
    throw InvalidArgument("SigmaForEpsilon: target must be > 0");
  }
  auto eps_at = [&](double s) {
    return EpsilonFor({s, q, delta, steps}, lambda_max).epsilon;
  };
  double lo = 0.05;
  double hi = 1.0;
  while (eps_at(hi) > target_epsilon) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e4) throw NumericFailure("SigmaForEpsilon: no sigma found");
  }
  while (hi - lo > 1e-4 * hi) {
    const double mid = 0.5 * (lo + hi);
    (eps_at(mid) > target_epsilon ? lo : hi) = mid;
  }
  return hi;
}

std::vector<double> GaussianVector(size_t dim, double stddev, Rng& rng) {
  if (dim < 1) throw InvalidArgument("GaussianVector: dim must be >= 1");
  if (!(stddev >= 0.0)) {
    throw InvalidArgument("GaussianVector: stddev must be >= 0");
  }
  std::vector<double> out(dim, 0.0);
  if (stddev == 0.0) return out;
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : out) v = dist(rng);
  return out;
}

}  // namespace fedcs::dp
