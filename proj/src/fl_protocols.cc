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


#include "fedcs/fl_protocols.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedcs/dp_accountant.h"
#include "fedcs/error.h"

namespace fedcs::fl {
namespace {

constexpr Scheme kAllSchemes[] = {Scheme::kStd,  Scheme::kStdDp, Scheme::kCs,
                                  Scheme::kCsDp, Scheme::kRnd,   Scheme::kRndDp,
                                  Scheme::kFreq, Scheme::kFreqDp};

void AddInto(std::vector<double>& acc, std::span<const double> v, double w) {
  for (size_t i = 0; i < acc.size(); ++i) acc[i] += w * v[i];
}

}  // namespace

std::string_view SchemeName(Scheme s) {
  switch (s) {
    case Scheme::kStd:
      return "fl-std";
    case Scheme::kStdDp:
      return "fl-std-dp";
    case Scheme::kCs:
      return "fl-cs";
    case Scheme::kCsDp:
      return "fl-cs-dp";
    case Scheme::kRnd:
      return "fl-rnd";
    case Scheme::kRndDp:
      return "fl-rnd-dp";
    case Scheme::kFreq:
      return "fl-freq";
    case Scheme::kFreqDp:
      return "fl-freq-dp";
  }
  return "?";
}

Scheme ParseScheme(std::string_view name) {
  for (Scheme s : kAllSchemes) {
    if (SchemeName(s) == name) return s;
  }
  throw InvalidArgument("unknown scheme '" + std::string(name) + "'");
}

bool IsPrivate(Scheme s) {
  return s == Scheme::kStdDp || s == Scheme::kCsDp || s == Scheme::kRndDp ||
         s == Scheme::kFreqDp;
}

Scheme NonPrivate(Scheme s) {
  switch (s) {
    case Scheme::kStdDp:
      return Scheme::kStd;
    case Scheme::kCsDp:
      return Scheme::kCs;
    case Scheme::kRndDp:
      return Scheme::kRnd;
    case Scheme::kFreqDp:
      return Scheme::kFreq;
    default:
      return s;
  }
}

std::string_view WeightingName(Weighting w) {
  return w == Weighting::kDataSize ? "data-size" : "uniform";
}

Weighting ParseWeighting(std::string_view name) {
  if (name == "data-size") return Weighting::kDataSize;
  if (name == "uniform") return Weighting::kUniform;
  throw InvalidArgument("unknown weighting '" + std::string(name) + "'");
}

Weighting DefaultWeighting(Scheme s) {
  if (IsPrivate(s) || s == Scheme::kCs) return Weighting::kUniform;
  return Weighting::kDataSize;
}

void HyperParams::Validate(Scheme scheme) const {
  if (!(eta >= 0.0)) throw InvalidArgument("eta must be >= 0");
  if (!(eta_g > 0.0)) throw InvalidArgument("eta_g must be > 0");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in [0, 1)");
  if (!(C > 0.0 && C <= 1.0)) throw InvalidArgument("C must lie in (0, 1]");
  if (rounds < 1) throw InvalidArgument("rounds must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
  if (IsPrivate(scheme)) {
    if (!(S > 0.0)) throw InvalidArgument("S must be > 0 for private schemes");
    if (!(sigma >= 0.0)) throw InvalidArgument("sigma must be >= 0");
  }
}

std::vector<size_t> SampleClients(size_t num_clients, double C, Rng& rng) {
  if (!(C > 0.0 && C <= 1.0)) {
    throw InvalidArgument("sample_clients: C must lie in (0, 1]");
  }
  const auto k = static_cast<size_t>(
      std::llround(C * static_cast<double>(num_clients)));
  if (k < 1) {
    throw InvalidArgument("sample_clients: round(C * N) = 0 clients");
  }
  std::vector<size_t> all(num_clients);
  std::iota(all.begin(), all.end(), size_t{0});
  // Partial Fisher-Yates.
  for (size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<size_t> pick(i, num_clients - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

double L2Norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> Clip(std::span<const double> v, double S) {
  if (!(S > 0.0)) throw InvalidArgument("clip: S must be > 0");
  const double div = std::max(1.0, L2Norm(v) / S);
  std::vector<double> out(v.begin(), v.end());
  if (div > 1.0) {
    for (double& x : out) x /= div;
  }
  return out;
}

double CalibrateSensitivity(std::vector<double> norms) {
  if (norms.empty()) throw InvalidArgument("calibrate_sensitivity: no norms");
  std::sort(norms.begin(), norms.end());
  const size_t h = norms.size() / 2;
  if (norms.size() % 2 == 1) return norms[h];
  return 0.5 * (norms[h - 1] + norms[h]);
}

std::vector<double> RoundWeights(std::span<const size_t> data_sizes,
                                 Weighting weighting) {
  if (data_sizes.empty()) throw InvalidArgument("round weights: no clients");
  std::vector<double> w(data_sizes.size());
  if (weighting == Weighting::kUniform) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  const double total = static_cast<double>(
      std::accumulate(data_sizes.begin(), data_sizes.end(), size_t{0}));
  if (!(total > 0.0)) throw InvalidArgument("round weights: no records");
  for (size_t k = 0; k < w.size(); ++k) w[k] = data_sizes[k] / total;
  return w;
}

std::vector<double> WeightedSum(std::span<const std::vector<double>> payloads,
                                std::span<const double> weights) {
  if (payloads.empty() || payloads.size() != weights.size()) {
    throw InvalidArgument("weighted sum: payload/weight count mismatch");
  }
  std::vector<double> acc(payloads[0].size(), 0.0);
  for (size_t k = 0; k < payloads.size(); ++k) {
    if (payloads[k].size() != acc.size()) {
      throw InvalidArgument("weighted sum: payload length mismatch");
    }
    AddInto(acc, payloads[k], weights[k]);
  }
  return acc;
}

std::vector<double> ClientUpdateStd(const ml::Model& model,
                                    const ml::Dataset& data,
                                    std::span<const double> w,
                                    const HyperParams& hp, Rng& rng) {
  const std::vector<double> local =
      ml::Sgd(model, data, w, hp.local_epochs, hp.eta, hp.batch_size, rng);
  std::vector<double> delta(w.size());
  for (size_t i = 0; i < w.size(); ++i) delta[i] = local[i] - w[i];
  return delta;
}

cs::CompressedUpdate ClientUpdateCs(const ml::Model& model,
                                    const ml::Dataset& data,
                                    std::span<const double> w,
                                    const HyperParams& hp,
                                    const cs::SensingConfig& cfg, Rng& rng) {
  return cs::Compress(ClientUpdateStd(model, data, w, hp, rng), cfg);
}

std::vector<size_t> RoundIndexSet(size_t n, size_t m, uint64_t master_seed,
                                  size_t round) {
  return SeededSubset(n, m, DeriveSeed(master_seed, "rnd", round));
}

std::vector<double> SampleCoordinates(std::span<const double> update,
                                      std::span<const size_t> idx) {
  std::vector<double> out(idx.size());
  for (size_t j = 0; j < idx.size(); ++j) out[j] = update[idx[j]];
  return out;
}

std::vector<double> FreqEncode(std::span<const double> update, size_t m) {
  if (m < 1 || m > update.size()) {
    throw InvalidArgument("freq encode: need 1 <= m <= n");
  }
  std::vector<double> c = cs::DctForward(update);
  c.resize(m);
  return c;
}

std::vector<double> FreqDecode(std::span<const double> coeffs, size_t n) {
  if (coeffs.size() > n) throw InvalidArgument("freq decode: m exceeds n");
  std::vector<double> full(n, 0.0);
  std::copy(coeffs.begin(), coeffs.end(), full.begin());
  return cs::DctInverse(full);
}

std::vector<double> Privatize(std::span<const double> payload, double S,
                              double sigma, size_t k, Rng& rng) {
  if (k < 1) throw InvalidArgument("privatize: |K| must be >= 1");
  if (!(sigma >= 0.0)) throw InvalidArgument("privatize: sigma must be >= 0");
  std::vector<double> out = Clip(payload, S);
  if (sigma > 0.0) {
    const std::vector<double> z = dp::GaussianVector(
        out.size(), S * sigma / std::sqrt(static_cast<double>(k)), rng);
    for (size_t i = 0; i < out.size(); ++i) out[i] += z[i];
  }
  return out;
}

secagg::MaskedVector ClientUpdateDp(std::span<const double> payload, double S,
                                    double sigma, size_t k,
                                    const secagg::RingParams& ring,
                                    std::span<const uint64_t> mask, Rng& rng) {
  return secagg::Encrypt(Privatize(payload, S, sigma, k, rng), mask, ring);
}

secagg::RingParams RoundRing(double S, double sigma, size_t k, int frac_bits) {
  const double max_abs =
      S + 6.0 * S * sigma / std::sqrt(static_cast<double>(k));
  return secagg::DeriveModulus(2.0 * max_abs, k, frac_bits);
}

ServerState ServerState::Init(std::vector<double> w0, size_t m) {
  ServerState s;
  s.w = std::move(w0);
  s.u.assign(m, 0.0);
  s.e.assign(m, 0.0);
  return s;
}

ServerState ServerStepCs(const ServerState& state, std::span<const double> y,
                         const HyperParams& hp, const cs::SensingConfig& cfg,
                         const bpdn::SolverOptions& opts,
                         CsRoundReport* report) {
  cfg.Validate();
  if (y.size() != cfg.m || state.u.size() != cfg.m ||
      state.e.size() != cfg.m || state.w.size() != cfg.n) {
    throw InvalidArgument("server round: state or payload size mismatch");
  }
  ServerState next = state;
  cs::CompressedUpdate acc{std::vector<double>(cfg.m), cfg};
  for (size_t i = 0; i < cfg.m; ++i) {
    next.u[i] = hp.rho * state.u[i] + y[i];
    acc.coeffs[i] = hp.eta_g * next.u[i] + state.e[i];
  }
  bpdn::Decompression rec = bpdn::Decompress(acc, opts);
  const cs::CompressedUpdate back = cs::Compress(rec.x, cfg);
  for (size_t i = 0; i < cfg.m; ++i) {
    next.e[i] = acc.coeffs[i] - back.coeffs[i];
  }
  for (size_t i = 0; i < cfg.n; ++i) next.w[i] += rec.x[i];
  ++next.round;
  if (report != nullptr) {
    report->y.assign(y.begin(), y.end());
    report->e_before = state.e;
    report->u = next.u;
    report->e_after = next.e;
    report->cs = back.coeffs;
    report->iterations = rec.total_iterations();
    report->s = std::move(rec.x);
    report->solves = std::move(rec.reports);
  }
  return next;
}

ServerState ServerRoundCs(const ServerState& state,
                          std::span<const cs::CompressedUpdate> updates,
                          std::span<const double> weights,
                          const HyperParams& hp, const cs::SensingConfig& cfg,
                          const bpdn::SolverOptions& opts,
                          CsRoundReport* report) {
  std::vector<std::vector<double>> payloads;
  payloads.reserve(updates.size());
  for (const cs::CompressedUpdate& u : updates) {
    if (!(u.cfg == cfg)) {
      throw InvalidArgument("server round: update has a different config");
    }
    payloads.push_back(u.coeffs);
  }
  return ServerStepCs(state, WeightedSum(payloads, weights), hp, cfg, opts,
                      report);
}

std::vector<double> DecodeMean(std::span<const secagg::MaskedVector> masked,
                               size_t expected_shares) {
  std::vector<double> sum = secagg::Aggregate(masked, expected_shares);
  for (double& v : sum) v /= static_cast<double>(expected_shares);
  return sum;
}

ServerState ServerRoundCsDp(const ServerState& state,
                            std::span<const secagg::MaskedVector> masked,
                            size_t expected_shares, const HyperParams& hp,
                            const cs::SensingConfig& cfg,
                            const bpdn::SolverOptions& opts,
                            CsRoundReport* report) {
  return ServerStepCs(state, DecodeMean(masked, expected_shares), hp, cfg,
                      opts, report);
}

std::vector<double> ServerRoundStd(std::span<const double> w,
                                   std::span<const std::vector<double>> updates,
                                   std::span<const double> weights) {
  const std::vector<double> avg = WeightedSum(updates, weights);
  if (avg.size() != w.size()) throw InvalidArgument("server round: size");
  std::vector<double> out(w.begin(), w.end());
  for (size_t i = 0; i < out.size(); ++i) out[i] += avg[i];
  return out;
}

std::vector<double> ServerRoundStdDp(
    std::span<const double> w, std::span<const secagg::MaskedVector> masked,
    size_t expected_shares) {
  const std::vector<double> avg = DecodeMean(masked, expected_shares);
  if (avg.size() != w.size()) throw InvalidArgument("server round: size");
  std::vector<double> out(w.begin(), w.end());
  for (size_t i = 0; i < out.size(); ++i) out[i] += avg[i];
  return out;
}

std::vector<double> ServerRoundRnd(std::span<const double> w,
                                   std::span<const std::vector<double>> sampled,
                                   std::span<const double> weights,
                                   std::span<const size_t> idx) {
  const std::vector<double> avg = WeightedSum(sampled, weights);
  if (avg.size() != idx.size()) throw InvalidArgument("server round: size");
  std::vector<double> out(w.begin(), w.end());
  for (size_t j = 0; j < idx.size(); ++j) out.at(idx[j]) += avg[j];
  return out;
}

std::vector<double> ServerRoundFreq(std::span<const double> w,
                                    std::span<const std::vector<double>> coeffs,
                                    std::span<const double> weights) {
  const std::vector<double> delta =
      FreqDecode(WeightedSum(coeffs, weights), w.size());
  std::vector<double> out(w.begin(), w.end());
  for (size_t i = 0; i < out.size(); ++i) out[i] += delta[i];
  return out;
}

double PrivateLambda(const HyperParams& hp, size_t k, size_t m, double scale) {
  const double noise = hp.eta_g * hp.S * hp.sigma / static_cast<double>(k);
  return scale * bpdn::UniversalThreshold(noise, m);
}

void FederationConfig::Validate() const {
  hp.Validate(scheme);
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidArgument("ratio must lie in (0, 1]");
  }
  if (chunks < 1) throw InvalidArgument("chunks must be >= 1");
  if (!(dp_lambda_scale >= 0.0)) {
    throw InvalidArgument("dp_lambda_scale must be >= 0");
  }
  solver.Validate();
}

Federation::Federation(const ml::Model& model,
                       std::vector<ml::Dataset> clients, FederationConfig cfg,
                       std::vector<double> w0)
    : model_(model), clients_(std::move(clients)), cfg_(std::move(cfg)) {
  cfg_.Validate();
  if (clients_.empty()) throw InvalidArgument("federation: no clients");
  n_ = model_.n_params();
  if (w0.size() != n_) throw InvalidArgument("federation: w0 length");
  const Scheme base = NonPrivate(cfg_.scheme);
  size_t m_state = 0;
  if (base == Scheme::kCs) {
    sensing_ = cs::SensingConfig::FromRatio(n_, cfg_.ratio, cfg_.chunks,
                                            cfg_.shuffle_seed);
    m_ = sensing_.m;
    m_state = m_;
  } else if (base == Scheme::kStd) {
    m_ = n_;
  } else {
    m_ = std::clamp<size_t>(
        static_cast<size_t>(std::llround(cfg_.ratio * static_cast<double>(n_))),
        1, n_);
  }
  state_ = ServerState::Init(std::move(w0), m_state);
}

size_t Federation::payload_size() const { return m_; }

std::vector<double> Federation::Payload(std::span<const double> update,
                                        std::span<const size_t> idx) const {
  switch (NonPrivate(cfg_.scheme)) {
    case Scheme::kStd:
      return std::vector<double>(update.begin(), update.end());
    case Scheme::kCs:
      return cs::Compress(update, sensing_).coeffs;
    case Scheme::kRnd:
      return SampleCoordinates(update, idx);
    case Scheme::kFreq:
      return FreqEncode(update, m_);
    default:
      break;
  }
  throw InvalidArgument("federation: unsupported scheme");
}

std::vector<double> Federation::CalibrationNorms() const {
  std::vector<size_t> idx;
  if (NonPrivate(cfg_.scheme) == Scheme::kRnd) {
    idx = RoundIndexSet(n_, m_, cfg_.master_seed, 1);
  }
  const uint64_t seed = DeriveSeed(cfg_.master_seed, "calibrate");
  std::vector<double> norms(clients_.size());
  for (size_t c = 0; c < clients_.size(); ++c) {
    Rng rng(DeriveSeed(seed, "client", c));
    const std::vector<double> delta =
        ClientUpdateStd(model_, clients_[c], state_.w, cfg_.hp, rng);
    norms[c] = L2Norm(Payload(delta, idx));
  }
  return norms;
}

void Federation::set_sensitivity(double S) {
  if (!(S > 0.0)) throw InvalidArgument("sensitivity must be > 0");
  cfg_.hp.S = S;
}

RoundReport Federation::Step() {
  const size_t round = state_.round + 1;
  const uint64_t seed = cfg_.master_seed;
  const HyperParams& hp = cfg_.hp;
  RoundReport rep;
  rep.round = round;

  Rng sample_rng(DeriveSeed(seed, "sample", round));
  rep.clients = SampleClients(clients_.size(), hp.C, sample_rng);
  const size_t k = rep.clients.size();

  const Scheme base = NonPrivate(cfg_.scheme);
  std::vector<size_t> idx;
  if (base == Scheme::kRnd) idx = RoundIndexSet(n_, m_, seed, round);

  std::vector<std::vector<double>> payloads(k);
  std::vector<size_t> sizes(k);
  const uint64_t sgd_seed = DeriveSeed(seed, "sgd", round);
  for (size_t j = 0; j < k; ++j) {
    const size_t c = rep.clients[j];
    Rng rng(DeriveSeed(sgd_seed, "client", c));
    const std::vector<double> delta =
        ClientUpdateStd(model_, clients_[c], state_.w, hp, rng);
    payloads[j] = Payload(delta, idx);
    sizes[j] = clients_[c].size();
  }

  std::vector<double> avg;
  if (IsPrivate(cfg_.scheme)) {
    const secagg::RingParams ring = RoundRing(hp.S, hp.sigma, k, cfg_.frac_bits);
    rep.ring = ring;
    std::vector<std::vector<uint64_t>> masks =
        cfg_.zero_masks
            ? std::vector<std::vector<uint64_t>>(k,
                                                 std::vector<uint64_t>(m_, 0))
            : secagg::GenMasks(k, m_, ring, DeriveSeed(seed, "mask", round));
    std::vector<secagg::MaskedVector> masked;
    masked.reserve(k);
    const uint64_t noise_seed = DeriveSeed(seed, "noise", round);
    for (size_t j = 0; j < k; ++j) {
      Rng rng(DeriveSeed(noise_seed, "client", rep.clients[j]));
      masked.push_back(ClientUpdateDp(payloads[j], hp.S, hp.sigma, k, ring,
                                      masks[j], rng));
    }
    const Weighting wt = cfg_.weighting.value_or(Weighting::kUniform);
    if (wt == Weighting::kUniform) {
      avg = DecodeMean(masked, k);
    } else {
      // Data-size weights need per-client scaling before masking, which the
      // private schemes do not define.
      throw InvalidArgument("private schemes only support uniform weighting");
    }
  } else {
    const Weighting wt = cfg_.weighting.value_or(DefaultWeighting(cfg_.scheme));
    avg = WeightedSum(payloads, RoundWeights(sizes, wt));
  }

  ServerState next;
  switch (base) {
    case Scheme::kStd:
      next = state_;
      for (size_t i = 0; i < n_; ++i) next.w[i] += avg[i];
      ++next.round;
      break;
    case Scheme::kRnd:
      next = state_;
      for (size_t j = 0; j < idx.size(); ++j) next.w[idx[j]] += avg[j];
      ++next.round;
      break;
    case Scheme::kFreq: {
      next = state_;
      const std::vector<double> delta = FreqDecode(avg, n_);
      for (size_t i = 0; i < n_; ++i) next.w[i] += delta[i];
      ++next.round;
      break;
    }
    case Scheme::kCs: {
      bpdn::SolverOptions opts = cfg_.solver;
      if (IsPrivate(cfg_.scheme) && hp.sigma > 0.0) {
        opts.lambda = PrivateLambda(hp, k, m_, cfg_.dp_lambda_scale);
        opts.lambda_relative = false;
      }
      CsRoundReport cs_rep;
      next = ServerStepCs(state_, avg, hp, sensing_, opts, &cs_rep);
      rep.solver_iterations = cs_rep.iterations;
      rep.cs = std::move(cs_rep);
      break;
    }
    default:
      throw InvalidArgument("federation: unsupported scheme");
  }
  for (double v : next.w) {
    if (!std::isfinite(v)) {
      throw NumericFailure("round " + std::to_string(round) +
                           ": non-finite global weights");
    }
  }
  state_ = std::move(next);
  return rep;
}

}  // namespace fedcs::fl
