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
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "fedcs/cs_codec.h"
#include "fedcs/dataset.h"
#include "fedcs/error.h"
#include "fedcs/fl_protocols.h"
#include "fedcs/model.h"
#include "fedcs/random.h"
#include "fedcs/secure_agg.h"

namespace fedcs::fl {
namespace {

ml::Dataset Blobs(size_t records, uint64_t seed) {
  ml::SyntheticSpec s;
  s.records = records;
  s.side = 4;
  s.num_classes = 3;
  s.seed = seed;
  return ml::MakeSynthetic(s);
}

std::vector<ml::Dataset> Clients(size_t count, size_t per_client) {
  std::vector<ml::Dataset> out;
  for (size_t c = 0; c < count; ++c) out.push_back(Blobs(per_client, 100 + c));
  return out;
}

ml::Dataset OneRecord() {
  ml::Dataset d;
  d.num_classes = 1;
  d.x = ml::RowMatrix::Zero(1, 1);
  d.labels = {0};
  return d;
}

double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  EXPECT_EQ(a.size(), b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// A moderate weight keeps the lasso solution unique and Lipschitz in y, so
// reductions can be checked to high precision.
bpdn::SolverOptions TightSolver() {
  bpdn::SolverOptions o;
  o.lambda = 0.05;
  o.lambda_relative = true;
  o.max_iters = 5000;
  o.grad_tol = 1e-14;
  o.obj_rel_tol = 1e-15;
  return o;
}

TEST(Schemes, NamesRoundTrip) {
  for (Scheme s : {Scheme::kStd, Scheme::kStdDp, Scheme::kCs, Scheme::kCsDp,
                   Scheme::kRnd, Scheme::kRndDp, Scheme::kFreq,
                   Scheme::kFreqDp}) {
    EXPECT_EQ(ParseScheme(SchemeName(s)), s);
  }
  EXPECT_EQ(NonPrivate(Scheme::kFreqDp), Scheme::kFreq);
  EXPECT_TRUE(IsPrivate(Scheme::kRndDp));
  EXPECT_FALSE(IsPrivate(Scheme::kCs));
  EXPECT_THROW(ParseScheme("fl-top-k"), InvalidArgument);
  EXPECT_EQ(DefaultWeighting(Scheme::kStd), Weighting::kDataSize);
  EXPECT_EQ(DefaultWeighting(Scheme::kCs), Weighting::kUniform);
  EXPECT_EQ(DefaultWeighting(Scheme::kStdDp), Weighting::kUniform);
}

TEST(SampleClients, Examples) {
  Rng rng(1);
  EXPECT_EQ(SampleClients(6000, 1.0 / 60, rng).size(), 100u);
  EXPECT_EQ(SampleClients(5011, 100.0 / 5011, rng).size(), 100u);
  const auto all = SampleClients(7, 1.0, rng);
  EXPECT_EQ(all, (std::vector<size_t>{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_THROW(SampleClients(10, 0.01, rng), InvalidArgument);
  const auto s = SampleClients(50, 0.2, rng);
  EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
}

TEST(Clip, Examples) {
  const std::vector<double> v = {3.0, 4.0};
  const auto half = Clip(v, 2.5);
  EXPECT_DOUBLE_EQ(half[0], 1.5);
  EXPECT_DOUBLE_EQ(L2Norm(half), 2.5);
  EXPECT_EQ(Clip(v, 10.0), v);
  EXPECT_EQ(Clip(std::vector<double>{0.0, 0.0}, 1.0),
            (std::vector<double>{0.0, 0.0}));
}

TEST(CalibrateSensitivity, Median) {
  EXPECT_DOUBLE_EQ(CalibrateSensitivity({0.5, 0.1, 0.3}), 0.3);
  EXPECT_DOUBLE_EQ(CalibrateSensitivity({0.7, 0.1, 0.5, 0.3}), 0.4);
  EXPECT_THROW(CalibrateSensitivity({}), InvalidArgument);
}

TEST(Weights, DataSizeAndUniform) {
  const std::vector<size_t> sizes = {10, 30};
  EXPECT_EQ(RoundWeights(sizes, Weighting::kDataSize),
            (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(RoundWeights(sizes, Weighting::kUniform),
            (std::vector<double>{0.5, 0.5}));
  const std::vector<size_t> equal = {20, 20, 20};
  EXPECT_EQ(RoundWeights(equal, Weighting::kDataSize),
            RoundWeights(equal, Weighting::kUniform));
}

TEST(ClientUpdateStd, QuadraticOneStep) {
  const ml::Quadratic model({0.0});
  HyperParams hp;
  hp.eta = 0.1;
  hp.batch_size = 1;
  Rng rng(1);
  const auto d = ClientUpdateStd(model, OneRecord(), std::vector<double>{1.0},
                                 hp, rng);
  EXPECT_NEAR(d[0], -0.1, 1e-15);

  const ml::Quadratic flat({2.0, -1.0});
  const auto z = ClientUpdateStd(flat, OneRecord(),
                                 std::vector<double>{2.0, -1.0}, hp, rng);
  EXPECT_EQ(z, (std::vector<double>{0.0, 0.0}));
}

TEST(ClientUpdateStd, LinearRegressionGradient) {
  const ml::LinearRegression model(3);
  ml::Dataset d;
  d.num_classes = 1;
  d.x.resize(5, 3);
  Rng rng(4);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < d.x.size(); ++i) d.x.data()[i] = g(rng);
  for (int i = 0; i < 5; ++i) {
    d.labels.push_back(0);
    d.targets.push_back(g(rng));
  }
  const std::vector<double> w = {0.3, -0.2, 0.5, 0.1};
  const std::vector<size_t> batch = {0, 1, 2, 3, 4};
  std::vector<double> grad(4), scratch(4);
  model.LossAndGrad(d, batch, w, grad);
  for (size_t i = 0; i < 4; ++i) {
    std::vector<double> wp = w, wm = w;
    wp[i] += 1e-6;
    wm[i] -= 1e-6;
    const double fd = (model.LossAndGrad(d, batch, wp, scratch) -
                       model.LossAndGrad(d, batch, wm, scratch)) /
                      2e-6;
    EXPECT_NEAR(fd, grad[i], 1e-5);
  }
}

TEST(ClientUpdateCs, ComposesCompress) {
  const ml::Quadratic model({1.0, 2.0, 3.0, 4.0, 5.0, 6.0});
  HyperParams hp;
  hp.eta = 0.5;
  hp.batch_size = 1;
  const auto cfg = cs::SensingConfig::Make(6, 6, 1, 0);
  const std::vector<double> w(6, 0.0);
  Rng r1(1), r2(1);
  const auto y = ClientUpdateCs(model, OneRecord(), w, hp, cfg, r1);
  const auto plain = ClientUpdateStd(model, OneRecord(), w, hp, r2);
  EXPECT_LE(MaxAbsDiff(y.coeffs, cs::DctForward(cs::Shuffle(plain, 0))),
            1e-12);
}

TEST(RoundIndexSet, SharedAndFresh) {
  const auto a = RoundIndexSet(100, 10, 7, 3);
  EXPECT_EQ(a, RoundIndexSet(100, 10, 7, 3));
  EXPECT_NE(a, RoundIndexSet(100, 10, 7, 4));
  auto full = RoundIndexSet(20, 20, 7, 1);
  std::sort(full.begin(), full.end());
  for (size_t i = 0; i < 20; ++i) EXPECT_EQ(full[i], i);
}

TEST(ServerRoundRnd, Examples) {
  const std::vector<double> w = {1.0, 2.0, 3.0};
  const std::vector<double> wts = {0.5, 0.5};
  // m = n with the full index set equals a std round.
  const std::vector<std::vector<double>> full = {{1, 1, 1}, {3, 3, 3}};
  const std::vector<size_t> idx = {2, 0, 1};
  std::vector<std::vector<double>> sampled;
  for (const auto& u : full) sampled.push_back(SampleCoordinates(u, idx));
  EXPECT_EQ(ServerRoundRnd(w, sampled, wts, idx),
            ServerRoundStd(w, full, wts));
  const std::vector<std::vector<double>> one = {{4.0}, {2.0}};
  const std::vector<size_t> i1 = {1};
  EXPECT_EQ(ServerRoundRnd(w, one, wts, i1),
            (std::vector<double>{1.0, 5.0, 3.0}));
}

TEST(ServerRoundFreq, Examples) {
  const std::vector<double> w = {0.0, 1.0, 2.0, 3.0, 4.0};
  const std::vector<std::vector<double>> ups = {{0.1, -0.2, 0.3, 0.0, 0.5},
                                                {0.3, 0.2, -0.1, 0.4, 0.1}};
  const std::vector<double> wts = {0.25, 0.75};
  std::vector<std::vector<double>> coeffs;
  for (const auto& u : ups) coeffs.push_back(FreqEncode(u, 5));
  EXPECT_LE(MaxAbsDiff(ServerRoundFreq(w, coeffs, wts),
                       ServerRoundStd(w, ups, wts)),
            1e-9);
  // A constant update lives in the DC coefficient alone.
  const std::vector<std::vector<double>> dc = {
      FreqEncode(std::vector<double>(5, 0.7), 1)};
  const std::vector<double> one = {1.0};
  const auto out = ServerRoundFreq(w, dc, one);
  for (size_t i = 0; i < 5; ++i) EXPECT_NEAR(out[i], w[i] + 0.7, 1e-12);
}

TEST(ServerStepCs, ZeroUpdatesOnlyAdvanceRound) {
  const auto cfg = cs::SensingConfig::Make(40, 20, 2, 5);
  const ServerState s0 = ServerState::Init(std::vector<double>(40, 0.5), 20);
  HyperParams hp;
  const ServerState s1 =
      ServerStepCs(s0, std::vector<double>(20, 0.0), hp, cfg, TightSolver());
  EXPECT_EQ(s1.w, s0.w);
  EXPECT_EQ(s1.u, s0.u);
  EXPECT_EQ(s1.e, s0.e);
  EXPECT_EQ(s1.round, 1u);
}

TEST(ServerStepCs, ExactReconstructionWhenSquare) {
  const auto cfg = cs::SensingConfig::Make(30, 30, 3, 9);
  Rng rng(2);
  std::normal_distribution<double> g;
  std::vector<double> update(30);
  for (double& v : update) v = g(rng);
  const auto y = cs::Compress(update, cfg);
  HyperParams hp;
  hp.eta_g = 0.7;
  bpdn::SolverOptions o = TightSolver();
  o.lambda = 0.0;
  const ServerState s1 =
      ServerStepCs(ServerState::Init(std::vector<double>(30, 0.0), 30),
                   y.coeffs, hp, cfg, o);
  for (size_t i = 0; i < 30; ++i) {
    EXPECT_NEAR(s1.w[i], 0.7 * update[i], 1e-8);
    EXPECT_NEAR(s1.e[i], 0.0, 1e-8);
  }
}

TEST(ServerStepCs, MomentumRecurrence) {
  const auto cfg = cs::SensingConfig::Make(4, 4, 1, 0);
  HyperParams hp;
  hp.rho = 0.9;
  const std::vector<double> y1 = {1.0, -2.0, 0.5, 0.0};
  const std::vector<double> y2 = {0.25, 1.0, -1.0, 3.0};
  ServerState s = ServerState::Init(std::vector<double>(4, 0.0), 4);
  s = ServerStepCs(s, y1, hp, cfg, TightSolver());
  s = ServerStepCs(s, y2, hp, cfg, TightSolver());
  for (size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(s.u[i], 0.9 * y1[i] + y2[i]);
}

TEST(ServerStepCs, ErrorFeedbackIdentity) {
  const auto cfg = cs::SensingConfig::Make(200, 40, 4, 3);
  HyperParams hp;
  hp.eta_g = 1.3;
  Rng rng(6);
  std::normal_distribution<double> g;
  ServerState s = ServerState::Init(std::vector<double>(200, 0.0), 40);
  bpdn::SolverOptions o;
  o.lambda = 1e-2;
  o.lambda_relative = true;
  for (int t = 0; t < 10; ++t) {
    std::vector<double> y(40);
    for (double& v : y) v = g(rng);
    CsRoundReport rep;
    s = ServerStepCs(s, y, hp, cfg, o, &rep);
    for (size_t i = 0; i < 40; ++i) {
      EXPECT_NEAR(rep.e_after[i] + rep.cs[i],
                  hp.eta_g * rep.u[i] + rep.e_before[i], 1e-12);
    }
  }
}

TEST(ServerStepCs, SolverFailureLeavesInputUntouched) {
  const auto cfg = cs::SensingConfig::Make(8, 4, 1, 0);
  const ServerState s0 = ServerState::Init(std::vector<double>(8, 1.0), 4);
  std::vector<double> y(4, 0.0);
  y[1] = std::nan("");
  EXPECT_THROW(ServerStepCs(s0, y, HyperParams{}, cfg, TightSolver()),
               NumericFailure);
  EXPECT_EQ(s0.round, 0u);
}

TEST(ClientUpdateDp, ReducesToPlainAndClips) {
  const secagg::RingParams ring = RoundRing(1.0, 0.0, 1);
  const std::vector<double> c = {0.3, -0.4};
  const std::vector<uint64_t> zero(2, 0);
  Rng rng(1);
  const auto mv = ClientUpdateDp(c, 1.0, 0.0, 1, ring, zero, rng);
  const auto back = DecodeMean(std::span<const secagg::MaskedVector>(&mv, 1), 1);
  EXPECT_LE(MaxAbsDiff(back, c), std::ldexp(1.0, -20));

  const std::vector<double> big = {0.6, -0.8};  // norm 1 = 2S
  const auto mv2 = ClientUpdateDp(big, 0.5, 0.0, 1, RoundRing(0.5, 0.0, 1),
                                  zero, rng);
  const auto b2 = DecodeMean(std::span<const secagg::MaskedVector>(&mv2, 1), 1);
  EXPECT_NEAR(L2Norm(b2), 0.5, 1e-6);
}

TEST(ClientUpdateDp, AggregateNoiseStd) {
  const size_t k = 10, m = 10000;
  const double S = 0.5, sigma = 2.0;
  const secagg::RingParams ring = RoundRing(S, sigma, k);
  const auto masks = secagg::GenMasks(k, m, ring, 3);
  const std::vector<double> zero(m, 0.0);
  std::vector<secagg::MaskedVector> shares;
  for (size_t j = 0; j < k; ++j) {
    Rng rng(DeriveSeed(11, "client", j));
    shares.push_back(ClientUpdateDp(zero, S, sigma, k, ring, masks[j], rng));
  }
  const auto sum = secagg::Aggregate(shares, k);
  double ss = 0.0;
  for (double v : sum) ss += v * v;
  EXPECT_NEAR(std::sqrt(ss / m), S * sigma, 0.05 * S * sigma);
}

TEST(ServerRoundCsDp, MasksOnlyAddQuantization) {
  const auto cfg = cs::SensingConfig::Make(60, 30, 2, 1);
  const size_t k = 4;
  Rng rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<std::vector<double>> pay(k, std::vector<double>(30));
  for (auto& p : pay) for (double& v : p) v = g(rng);
  const secagg::RingParams ring = RoundRing(10.0, 0.0, k);
  const auto masks = secagg::GenMasks(k, 30, ring, 8);
  std::vector<secagg::MaskedVector> zero_masked, masked;
  for (size_t j = 0; j < k; ++j) {
    Rng r(j);
    zero_masked.push_back(ClientUpdateDp(pay[j], 10.0, 0.0, k, ring,
                                         std::vector<uint64_t>(30, 0), r));
    masked.push_back(ClientUpdateDp(pay[j], 10.0, 0.0, k, ring, masks[j], r));
  }
  const ServerState s0 = ServerState::Init(std::vector<double>(60, 0.0), 30);
  HyperParams hp;
  const auto a = DecodeMean(zero_masked, k);
  const auto b = DecodeMean(masked, k);
  EXPECT_LE(MaxAbsDiff(a, b), std::ldexp(1.0, -19));
  const ServerState sa =
      ServerRoundCsDp(s0, zero_masked, k, hp, cfg, TightSolver());
  std::vector<cs::CompressedUpdate> plain;
  for (const auto& p : pay) plain.push_back({p, cfg});
  const std::vector<double> uniform(k, 1.0 / k);
  const ServerState sp =
      ServerRoundCs(s0, plain, uniform, hp, cfg, TightSolver());
  EXPECT_LE(MaxAbsDiff(sa.w, sp.w), 1e-4);
  EXPECT_THROW(ServerRoundCsDp(s0, std::span(masked).first(3), k, hp, cfg,
                               TightSolver()),
               ProtocolError);
}

TEST(ServerRoundStdDp, MatchesUniformMean) {
  const std::vector<double> w = {1.0, -1.0};
  const std::vector<std::vector<double>> ups = {{0.2, 0.4}, {-0.6, 0.0}};
  const secagg::RingParams ring = RoundRing(5.0, 0.0, 2);
  std::vector<secagg::MaskedVector> masked;
  for (const auto& u : ups) {
    Rng r(1);
    masked.push_back(ClientUpdateDp(u, 5.0, 0.0, 2, ring,
                                    std::vector<uint64_t>(2, 0), r));
  }
  const std::vector<double> uniform = {0.5, 0.5};
  EXPECT_LE(MaxAbsDiff(ServerRoundStdDp(w, masked, 2),
                       ServerRoundStd(w, ups, uniform)),
            std::ldexp(1.0, -20));
  const std::vector<std::vector<double>> single = {{0.5, 0.5}};
  const std::vector<double> one = {1.0};
  EXPECT_EQ(ServerRoundStd(w, single, one), (std::vector<double>{1.5, -0.5}));
}

// Each private scheme with sigma = 0, zero masks and a non-binding clip
// tracks its uniformly weighted non-private counterpart round for round.
void CheckReduction(Scheme scheme) {
  const ml::Mlp model(ml::ModelSpec::Parse("16-6-3", ml::Activation::kRelu,
                                           ml::LossKind::kCategorical));
  FederationConfig base;
  base.hp.C = 0.5;
  base.hp.eta = 0.2;
  base.hp.eta_g = 1.0;
  base.hp.local_epochs = 2;
  base.hp.batch_size = 5;
  base.hp.S = 1e3;
  base.hp.sigma = 0.0;
  base.ratio = 0.5;
  base.chunks = 2;
  base.shuffle_seed = 4;
  base.solver = TightSolver();
  base.master_seed = 17;
  base.frac_bits = 40;
  base.weighting = Weighting::kUniform;
  Rng init(2);
  const std::vector<double> w0 = model.Init(init);

  FederationConfig priv = base;
  priv.scheme = scheme;
  priv.zero_masks = true;
  FederationConfig plain = base;
  plain.scheme = NonPrivate(scheme);

  Federation a(model, Clients(8, 20), priv, w0);
  Federation b(model, Clients(8, 20), plain, w0);
  for (int t = 0; t < 5; ++t) {
    const RoundReport ra = a.Step();
    const RoundReport rb = b.Step();
    EXPECT_EQ(ra.clients, rb.clients);
    EXPECT_LE(MaxAbsDiff(a.state().w, b.state().w), 1e-9)
        << SchemeName(scheme) << " round " << t + 1;
  }
}

TEST(Federation, DpReductionStd) { CheckReduction(Scheme::kStdDp); }
TEST(Federation, DpReductionCs) { CheckReduction(Scheme::kCsDp); }
TEST(Federation, DpReductionRnd) { CheckReduction(Scheme::kRndDp); }
TEST(Federation, DpReductionFreq) { CheckReduction(Scheme::kFreqDp); }

TEST(Federation, PayloadSizes) {
  const ml::Mlp model(ml::ModelSpec::Parse("16-6-3", ml::Activation::kRelu,
                                           ml::LossKind::kCategorical));
  const size_t n = model.n_params();
  Rng init(1);
  const std::vector<double> w0 = model.Init(init);
  auto size_for = [&](Scheme s) {
    FederationConfig c;
    c.scheme = s;
    c.ratio = 0.1;
    c.chunks = 1;
    c.hp.sigma = IsPrivate(s) ? 1.0 : 0.0;
    return Federation(model, Clients(2, 10), c, w0).payload_size();
  };
  EXPECT_EQ(size_for(Scheme::kStd), n);
  EXPECT_EQ(size_for(Scheme::kStdDp), n);
  const size_t m = static_cast<size_t>(std::llround(0.1 * n));
  EXPECT_EQ(size_for(Scheme::kCs), m);
  EXPECT_EQ(size_for(Scheme::kRnd), m);
  EXPECT_EQ(size_for(Scheme::kFreqDp), m);
}

TEST(Federation, PrivateSchemesRejectDataSizeWeights) {
  const ml::Mlp model(ml::ModelSpec::Parse("16-6-3", ml::Activation::kRelu,
                                           ml::LossKind::kCategorical));
  Rng init(1);
  FederationConfig c;
  c.scheme = Scheme::kStdDp;
  c.hp.C = 1.0;
  c.weighting = Weighting::kDataSize;
  Federation f(model, Clients(2, 10), c, model.Init(init));
  EXPECT_THROW(f.Step(), InvalidArgument);
  EXPECT_EQ(f.state().round, 0u);
}

TEST(Federation, CsDpNoiseCarriesIdentity) {
  const ml::Mlp model(ml::ModelSpec::Parse("16-6-3", ml::Activation::kRelu,
                                           ml::LossKind::kCategorical));
  Rng init(1);
  FederationConfig c;
  c.scheme = Scheme::kCsDp;
  c.hp.C = 0.5;
  c.hp.S = 0.5;
  c.hp.sigma = 1.5;
  c.ratio = 0.3;
  c.chunks = 2;
  c.master_seed = 3;
  Federation f(model, Clients(6, 15), c, model.Init(init));
  for (int t = 0; t < 4; ++t) {
    const RoundReport r = f.Step();
    ASSERT_TRUE(r.cs.has_value());
    const CsRoundReport& cs = *r.cs;
    for (size_t i = 0; i < cs.u.size(); ++i) {
      EXPECT_NEAR(cs.e_after[i] + cs.cs[i],
                  c.hp.eta_g * cs.u[i] + cs.e_before[i], 1e-12);
    }
  }
}

}  // namespace
}  // namespace fedcs::fl
