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
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "fedcs/dataset.h"
#include "fedcs/error.h"
#include "fedcs/metrics.h"
#include "fedcs/model.h"
#include "fedcs/random.h"

namespace fedcs::ml {
namespace {

Dataset RandomData(size_t records, size_t features, int classes,
                   uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset d;
  d.num_classes = classes;
  d.x.resize(records, features);
  for (size_t i = 0; i < records; ++i) {
    for (size_t j = 0; j < features; ++j) d.x(i, j) = u(rng);
    d.labels.push_back(static_cast<int>(i % classes));
  }
  return d;
}

Dataset Labeled(const std::vector<int>& labels, int classes) {
  Dataset d;
  d.num_classes = classes;
  d.x = RowMatrix::Zero(labels.size(), 1);
  for (size_t i = 0; i < labels.size(); ++i) d.x(i, 0) = i;
  d.labels = labels;
  return d;
}

void CheckGradient(const ModelSpec& spec, int classes) {
  const Mlp model(spec);
  const Dataset data = RandomData(8, spec.widths.front(), classes, 5);
  Rng rng(9);
  std::vector<double> w = model.Init(rng);
  // Nonzero biases exercise every term.
  std::normal_distribution<double> g(0.0, 0.1);
  for (double& v : w) v += g(rng);
  std::vector<size_t> batch(data.size());
  std::iota(batch.begin(), batch.end(), 0);
  std::vector<double> grad(w.size());
  model.LossAndGrad(data, batch, w, grad);

  std::vector<double> scratch(w.size());
  const double h = 1e-5;
  for (int t = 0; t < 20; ++t) {
    const size_t i = rng() % w.size();
    std::vector<double> wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    const double fd = (model.LossAndGrad(data, batch, wp, scratch) -
                       model.LossAndGrad(data, batch, wm, scratch)) /
                      (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    EXPECT_LE(std::abs(fd - grad[i]) / denom, 1e-4) << "coordinate " << i;
  }
}

TEST(ModelSpec, ParseAndCount) {
  const ModelSpec s =
      ModelSpec::Parse("784-32-10", Activation::kRelu, LossKind::kCategorical);
  EXPECT_EQ(s.widths, (std::vector<size_t>{784, 32, 10}));
  EXPECT_EQ(s.n_params(), 784u * 32 + 32 + 32 * 10 + 10);
  EXPECT_THROW(ModelSpec::Parse("784", Activation::kRelu,
                                LossKind::kCategorical),
               InvalidArgument);
  EXPECT_THROW(ModelSpec::Parse("784-x-10", Activation::kRelu,
                                LossKind::kCategorical),
               InvalidArgument);
  EXPECT_THROW(ModelSpec::Parse("10-4-3", Activation::kRelu,
                                LossKind::kBinary),
               InvalidArgument);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  CheckGradient(ModelSpec::Parse("6-5-4", Activation::kRelu,
                                 LossKind::kCategorical),
                4);
  CheckGradient(ModelSpec::Parse("6-5-3-1", Activation::kSigmoid,
                                 LossKind::kBinary),
                2);
  CheckGradient(ModelSpec::Parse("5-7-3", Activation::kSigmoid,
                                 LossKind::kCategorical),
                3);
}

TEST(Mlp, PackUnpackRoundTrip) {
  const Mlp model(ModelSpec::Parse("3-4-2", Activation::kRelu,
                                   LossKind::kCategorical));
  std::vector<double> w(model.n_params());
  std::iota(w.begin(), w.end(), 0.0);
  const auto layers = model.Unpack(w);
  ASSERT_EQ(layers.size(), 2u);
  EXPECT_EQ(layers[0].weight(0, 1), 1.0);  // row-major
  EXPECT_EQ(layers[0].weight(1, 0), 3.0);
  EXPECT_EQ(layers[0].bias(0), 12.0);
  EXPECT_EQ(model.Pack(layers), w);
}

TEST(Mlp, PredictRowsAreDistributions) {
  const Mlp model(ModelSpec::Parse("4-6-3", Activation::kRelu,
                                   LossKind::kCategorical));
  const Dataset d = RandomData(10, 4, 3, 2);
  Rng rng(1);
  const RowMatrix p = model.Predict(d, model.Init(rng));
  ASSERT_EQ(p.cols(), 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
  }
}

TEST(Sgd, ZeroStepKeepsWeights) {
  const Mlp model(ModelSpec::Parse("4-3-2", Activation::kRelu,
                                   LossKind::kCategorical));
  const Dataset d = RandomData(12, 4, 2, 3);
  Rng rng(4);
  const std::vector<double> w = model.Init(rng);
  EXPECT_EQ(Sgd(model, d, w, 3, 0.0, 5, rng), w);
}

TEST(Sgd, ScalarQuadraticOneStep) {
  const Quadratic model({0.0});
  const Dataset d = Labeled({0}, 1);
  Rng rng(1);
  const std::vector<double> w = Sgd(model, d, std::vector<double>{1.0}, 1,
                                    0.1, 1, rng);
  EXPECT_DOUBLE_EQ(w[0], 0.9);
}

TEST(Sgd, ReducesLossAndFlagsDivergence) {
  const Mlp model(ModelSpec::Parse("8-6-3", Activation::kRelu,
                                   LossKind::kCategorical));
  const Dataset d = RandomData(60, 8, 3, 6);
  Rng rng(2);
  const std::vector<double> w0 = model.Init(rng);
  const std::vector<double> w1 = Sgd(model, d, w0, 20, 0.1, 10, rng);
  EXPECT_LT(MeanLoss(model, d, w1), MeanLoss(model, d, w0));

  const LinearRegression lin(1);
  Dataset r = Labeled({0, 0, 0}, 1);
  r.x << 1e200, 2e200, 3e200;
  r.targets = {1.0, 2.0, 3.0};
  EXPECT_THROW(Sgd(lin, r, std::vector<double>{1.0, 0.0}, 1, 1.0, 3, rng),
               NumericFailure);
}

TEST(Metrics, BalancedAccuracyExamples) {
  const std::vector<int> labels = {0, 1, 1, 0, 2};
  EXPECT_DOUBLE_EQ(BalancedAccuracy(labels, labels, 3), 1.0);

  std::vector<int> imb(100, 0);
  for (int i = 0; i < 5; ++i) imb[i] = 1;
  EXPECT_DOUBLE_EQ(BalancedAccuracy(std::vector<int>(100, 0), imb, 2), 0.5);

  std::vector<int> y, p;
  for (int i = 0; i < 100; ++i) {
    y.push_back(1);
    p.push_back(i < 50 ? 1 : 0);
  }
  for (int i = 0; i < 100; ++i) {
    y.push_back(0);
    p.push_back(i < 80 ? 0 : 1);
  }
  EXPECT_DOUBLE_EQ(BalancedAccuracy(p, y, 2), 0.65);
  EXPECT_THROW(BalancedAccuracy(std::vector<int>{0, 0},
                                std::vector<int>{0, 0}, 2),
               InvalidArgument);
}

TEST(Metrics, AurocExamples) {
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{0.1, 0.2, 0.8, 0.9},
                         std::vector<int>{0, 0, 1, 1}),
                   1.0);
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>(6, 0.3),
                         std::vector<int>{0, 1, 0, 1, 1, 0}),
                   0.5);
  // One tie between classes counts one half.
  EXPECT_DOUBLE_EQ(Auroc(std::vector<double>{0.1, 0.5, 0.5, 0.9},
                         std::vector<int>{0, 0, 1, 1}),
                   0.875);
  EXPECT_THROW(Auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}),
               InvalidArgument);

  Rng rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(10000);
  std::vector<int> l(10000);
  for (size_t i = 0; i < s.size(); ++i) {
    s[i] = u(rng);
    l[i] = static_cast<int>(rng() % 2);
  }
  EXPECT_NEAR(Auroc(s, l), 0.5, 0.02);
}

TEST(Metrics, AurocInvariantUnderMonotoneMaps) {
  Rng rng(21);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(40), ts(40);
    std::vector<int> l(40);
    for (size_t i = 0; i < s.size(); ++i) {
      l[i] = i % 3 == 0;
      s[i] = std::round(4 * (g(rng) + l[i])) / 4;  // ties on purpose
      ts[i] = std::exp(3 * s[i]) + 7;
    }
    EXPECT_DOUBLE_EQ(Auroc(s, l), Auroc(ts, l));
  }
}

TEST(Metrics, EvaluateBinaryAndMulticlass) {
  RowMatrix bin(4, 1);
  bin << 0.9, 0.2, 0.6, 0.4;
  const EvalReport b = Evaluate(bin, std::vector<int>{1, 0, 0, 1}, 2);
  EXPECT_EQ(b.tp, 1u);
  EXPECT_EQ(b.tn, 1u);
  EXPECT_EQ(b.fp, 1u);
  EXPECT_EQ(b.fn, 1u);
  EXPECT_DOUBLE_EQ(b.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(b.auroc, 0.75);

  RowMatrix multi(3, 3);
  multi << 0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.1, 0.1, 0.8;
  const EvalReport m = Evaluate(multi, std::vector<int>{0, 1, 2}, 3);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.balanced_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(m.auroc, 1.0);
  EXPECT_EQ(m.confusion[1][1], 1u);
}

TEST(Partition, IidOneRecordPerClient) {
  const Dataset d = RandomData(6000, 1, 10, 1);
  Rng rng(3);
  const Partition p = MakePartition(d, 6000, {}, rng);
  ASSERT_EQ(p.size(), 6000u);
  for (const auto& c : p) EXPECT_EQ(c.size(), 1u);
}

TEST(Partition, DisjointAndCovering) {
  const Dataset d = RandomData(1003, 1, 10, 1);
  for (PartitionMode mode : {PartitionMode::kIid, PartitionMode::kLabelSkew}) {
    Rng rng(7);
    PartitionOptions o;
    o.mode = mode;
    const Partition p = MakePartition(d, 37, o, rng);
    std::vector<int> seen(d.size(), 0);
    for (const auto& c : p) {
      EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
      for (size_t i : c) ++seen[i];
    }
    for (int s : seen) ASSERT_EQ(s, 1);
  }
}

TEST(Partition, LabelSkewSingleClass) {
  const Dataset d = RandomData(500, 1, 5, 1);
  Rng rng(8);
  PartitionOptions o;
  o.mode = PartitionMode::kLabelSkew;
  o.classes_per_client = 1;
  const Partition p = MakePartition(d, 20, o, rng);
  for (const auto& c : p) {
    std::set<int> cls;
    for (size_t i : c) cls.insert(d.labels[i]);
    EXPECT_LE(cls.size(), 1u);
  }
}

TEST(Partition, EnsureClassReachesEveryClient) {
  std::vector<int> labels(400, 0);
  for (int i = 0; i < 40; ++i) labels[i * 10] = 1;
  const Dataset d = Labeled(labels, 2);
  Rng rng(2);
  PartitionOptions o;
  o.ensure_class = 1;
  for (const auto& c : MakePartition(d, 40, o, rng)) {
    EXPECT_TRUE(std::any_of(c.begin(), c.end(),
                            [&](size_t i) { return labels[i] == 1; }));
  }
}

TEST(Downsample, Examples) {
  Rng rng(1);
  const Dataset bal = Labeled({0, 1, 0, 1}, 2);
  const std::vector<size_t> all = {0, 1, 2, 3};
  EXPECT_EQ(Downsample(bal, all, rng), all);

  std::vector<int> labels(100, 0);
  labels[10] = labels[50] = labels[90] = 1;
  const Dataset skew = Labeled(labels, 2);
  std::vector<size_t> idx(100);
  std::iota(idx.begin(), idx.end(), 0);
  const auto kept = Downsample(skew, idx, rng);
  ASSERT_EQ(kept.size(), 6u);
  EXPECT_EQ(std::count_if(kept.begin(), kept.end(),
                          [&](size_t i) { return labels[i] == 1; }),
            3);

  const Dataset none = Labeled(std::vector<int>(10, 0), 2);
  std::vector<size_t> ten(10);
  std::iota(ten.begin(), ten.end(), 0);
  EXPECT_THROW(Downsample(none, ten, rng), InvalidArgument);
}

void PutBe32(std::vector<uint8_t>& b, uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back((v >> s) & 0xff);
}

std::vector<uint8_t> Images(uint32_t count, uint8_t fill) {
  std::vector<uint8_t> b;
  PutBe32(b, 2051);
  PutBe32(b, count);
  PutBe32(b, 28);
  PutBe32(b, 28);
  b.insert(b.end(), count * 784, fill);
  return b;
}

std::vector<uint8_t> Labels(uint32_t count) {
  std::vector<uint8_t> b;
  PutBe32(b, 2049);
  PutBe32(b, count);
  for (uint32_t i = 0; i < count; ++i) b.push_back(i % 10);
  return b;
}

TEST(LoadIdx, Examples) {
  const Dataset z = LoadIdx(Images(1, 0), Labels(1));
  ASSERT_EQ(z.size(), 1u);
  ASSERT_EQ(z.features(), 784u);
  EXPECT_EQ(z.x.sum(), 0.0);
  EXPECT_EQ(z.num_classes, 10);

  const Dataset full = LoadIdx(Images(2, 255), Labels(2));
  EXPECT_EQ(full.x(1, 783), 1.0);
  EXPECT_EQ(full.labels[1], 1);
}

TEST(LoadIdx, FormatErrors) {
  auto bad_magic = Images(1, 0);
  bad_magic[3] = 0x01;
  EXPECT_THROW(LoadIdx(bad_magic, Labels(1)), FormatError);

  auto truncated = Images(2, 0);
  truncated.pop_back();
  try {
    LoadIdx(truncated, Labels(2));
    FAIL() << "truncated payload accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }

  EXPECT_THROW(LoadIdx(Images(3, 0), Labels(2)), FormatError);
  EXPECT_THROW(LoadIdx(Images(1, 0), std::vector<uint8_t>{0, 0}),
               FormatError);
}

TEST(Synthetic, DeterministicWithZeroBackground) {
  SyntheticSpec s;
  s.records = 200;
  const Dataset a = MakeSynthetic(s);
  const Dataset b = MakeSynthetic(s);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_GE(a.x.minCoeff(), 0.0);
  EXPECT_LE(a.x.maxCoeff(), 1.0);
  const double zeros = (a.x.array() == 0.0).cast<double>().sum();
  EXPECT_GT(zeros / a.x.size(), 0.3);
  const auto counts = a.ClassCounts();
  ASSERT_EQ(counts.size(), 10u);
  for (size_t c : counts) EXPECT_GT(c, 0u);
}

}  // namespace
}  // namespace fedcs::ml
