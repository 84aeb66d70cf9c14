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


#ifndef FEDCS_FL_PROTOCOLS_H_
#define FEDCS_FL_PROTOCOLS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fedcs/bpdn.h"
#include "fedcs/cs_codec.h"
#include "fedcs/dataset.h"
#include "fedcs/model.h"
#include "fedcs/random.h"
#include "fedcs/secure_agg.h"

namespace fedcs::fl {

enum class Scheme { kStd, kStdDp, kCs, kCsDp, kRnd, kRndDp, kFreq, kFreqDp };

std::string_view SchemeName(Scheme s);
Scheme ParseScheme(std::string_view name);
bool IsPrivate(Scheme s);
// fl-cs-dp -> fl-cs and so on.
Scheme NonPrivate(Scheme s);

// How the server weights client payloads in a round.
enum class Weighting { kDataSize, kUniform };

std::string_view WeightingName(Weighting w);
Weighting ParseWeighting(std::string_view name);
// As each algorithm is written: |D_k| weights for fl-std, fl-rnd and
// fl-freq; 1/|K| for fl-cs and every private scheme.
Weighting DefaultWeighting(Scheme s);

struct HyperParams {
  double eta = 0.1;    // client learning rate
  double eta_g = 1.0;  // global learning rate (fl-cs family)
  double rho = 0.9;    // momentum (fl-cs family)
  double S = 1.0;      // clipping bound
  double sigma = 0.0;  // noise multiplier
  double C = 0.1;      // client sampling fraction
  size_t rounds = 1;
  size_t local_epochs = 1;
  size_t batch_size = 10;

  void Validate(Scheme scheme) const;
};

// |K| = round(C * N) distinct clients, ascending.
std::vector<size_t> SampleClients(size_t num_clients, double C, Rng& rng);

double L2Norm(std::span<const double> v);

// v / max(1, ||v|| / S)
std::vector<double> Clip(std::span<const double> v, double S);

// Median of the per-client update norms.
double CalibrateSensitivity(std::vector<double> norms);

std::vector<double> RoundWeights(std::span<const size_t> data_sizes,
                                 Weighting weighting);

std::vector<double> WeightedSum(std::span<const std::vector<double>> payloads,
                                std::span<const double> weights);

// ---- clients -------------------------------------------------------------

// Local SGD from w; returns w_local - w.
std::vector<double> ClientUpdateStd(const ml::Model& model,
                                    const ml::Dataset& data,
                                    std::span<const double> w,
                                    const HyperParams& hp, Rng& rng);

cs::CompressedUpdate ClientUpdateCs(const ml::Model& model,
                                    const ml::Dataset& data,
                                    std::span<const double> w,
                                    const HyperParams& hp,
                                    const cs::SensingConfig& cfg, Rng& rng);

// Index set shared by all clients of a round.
std::vector<size_t> RoundIndexSet(size_t n, size_t m, uint64_t master_seed,
                                  size_t round);

std::vector<double> SampleCoordinates(std::span<const double> update,
                                      std::span<const size_t> idx);

// First m orthonormal DCT coefficients of the whole vector, no chunking.
std::vector<double> FreqEncode(std::span<const double> update, size_t m);
std::vector<double> FreqDecode(std::span<const double> coeffs, size_t n);

// Clips to S and adds N(0, (S sigma / sqrt(k))^2) per coordinate.
std::vector<double> Privatize(std::span<const double> payload, double S,
                              double sigma, size_t k, Rng& rng);

secagg::MaskedVector ClientUpdateDp(std::span<const double> payload, double S,
                                    double sigma, size_t k,
                                    const secagg::RingParams& ring,
                                    std::span<const uint64_t> mask, Rng& rng);

// Modulus for one private round: per-entry bound S + 6 S sigma / sqrt(k),
// doubled for the sign.
secagg::RingParams RoundRing(double S, double sigma, size_t k,
                             int frac_bits = 20);

// ---- server --------------------------------------------------------------

struct ServerState {
  std::vector<double> w;
  std::vector<double> u;  // momentum, compressed domain
  std::vector<double> e;  // error feedback, compressed domain
  size_t round = 0;

  static ServerState Init(std::vector<double> w0, size_t m);
};

struct CsRoundReport {
  std::vector<double> y;         // averaged coefficients
  std::vector<double> e_before;  // e_old
  std::vector<double> u;         // u_new
  std::vector<double> e_after;   // e_new
  std::vector<double> s;         // reconstruction, length n
  std::vector<double> cs;        // compress(s)
  std::vector<bpdn::SolveReport> solves;
  size_t iterations = 0;
};

// u <- rho u + y; e <- eta_g u + e; s = D(e); e <- e - C(s); w <- w + s.
ServerState ServerStepCs(const ServerState& state, std::span<const double> y,
                         const HyperParams& hp, const cs::SensingConfig& cfg,
                         const bpdn::SolverOptions& opts,
                         CsRoundReport* report = nullptr);

ServerState ServerRoundCs(const ServerState& state,
                          std::span<const cs::CompressedUpdate> updates,
                          std::span<const double> weights,
                          const HyperParams& hp, const cs::SensingConfig& cfg,
                          const bpdn::SolverOptions& opts,
                          CsRoundReport* report = nullptr);

// Mean of the decoded private contributions (sum / expected_shares).
std::vector<double> DecodeMean(std::span<const secagg::MaskedVector> masked,
                               size_t expected_shares);

ServerState ServerRoundCsDp(const ServerState& state,
                            std::span<const secagg::MaskedVector> masked,
                            size_t expected_shares, const HyperParams& hp,
                            const cs::SensingConfig& cfg,
                            const bpdn::SolverOptions& opts,
                            CsRoundReport* report = nullptr);

std::vector<double> ServerRoundStd(std::span<const double> w,
                                   std::span<const std::vector<double>> updates,
                                   std::span<const double> weights);

std::vector<double> ServerRoundStdDp(
    std::span<const double> w, std::span<const secagg::MaskedVector> masked,
    size_t expected_shares);

std::vector<double> ServerRoundRnd(std::span<const double> w,
                                   std::span<const std::vector<double>> sampled,
                                   std::span<const double> weights,
                                   std::span<const size_t> idx);

std::vector<double> ServerRoundFreq(std::span<const double> w,
                                    std::span<const std::vector<double>> coeffs,
                                    std::span<const double> weights);

// Universal threshold matched to the noise std eta_g S sigma / |K| of the
// averaged coefficients, times scale.
double PrivateLambda(const HyperParams& hp, size_t k, size_t m, double scale);

// ---- round driver --------------------------------------------------------

struct FederationConfig {
  Scheme scheme = Scheme::kStd;
  HyperParams hp;
  std::optional<Weighting> weighting;  // default per scheme
  double ratio = 1.0;                  // r = m / n
  size_t chunks = 1;                   // P, fl-cs family
  uint64_t shuffle_seed = 0;
  bpdn::SolverOptions solver;
  double dp_lambda_scale = 1.0;
  uint64_t master_seed = 0;
  int frac_bits = 20;
  bool zero_masks = false;  // test mode

  void Validate() const;
};

struct RoundReport {
  size_t round = 0;  // 1-based
  std::vector<size_t> clients;
  size_t solver_iterations = 0;
  std::optional<CsRoundReport> cs;
  std::optional<secagg::RingParams> ring;
};

class Federation {
 public:
  Federation(const ml::Model& model, std::vector<ml::Dataset> clients,
             FederationConfig cfg, std::vector<double> w0);

  // Runs one round. On failure the state is left as it was.
  RoundReport Step();

  const ServerState& state() const { return state_; }
  const FederationConfig& config() const { return cfg_; }
  size_t n() const { return n_; }
  // Values uploaded per client per round.
  size_t payload_size() const;
  const cs::SensingConfig& sensing() const { return sensing_; }
  size_t num_clients() const { return clients_.size(); }

  // Norm of every client's round-1 payload at the current weights, for
  // sensitivity calibration. Uses its own seed stream.
  std::vector<double> CalibrationNorms() const;

  // Replaces the clipping bound; used after calibration.
  void set_sensitivity(double S);

 private:
  std::vector<double> Payload(std::span<const double> update,
                              std::span<const size_t> idx) const;

  const ml::Model& model_;
  std::vector<ml::Dataset> clients_;
  FederationConfig cfg_;
  size_t n_;
  size_t m_;  // payload length for compressed schemes
  cs::SensingConfig sensing_;
  ServerState state_;
};

}  // namespace fedcs::fl

#endif  // FEDCS_FL_PROTOCOLS_H_
