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


#include "fedcs/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "fedcs/error.h"

namespace fedcs::ml {
namespace {

using RowMap = Eigen::Map<const RowMatrix>;
using RowMapMut = Eigen::Map<RowMatrix>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMapMut = Eigen::Map<Eigen::VectorXd>;

void CheckBatch(const Dataset& data, std::span<const size_t> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  for (size_t i : batch) {
    if (i >= data.size()) {
      throw InvalidArgument("batch index " + std::to_string(i) +
                            " out of range");
    }
  }
}

RowMatrix Gather(const Dataset& data, std::span<const size_t> batch) {
  RowMatrix out(batch.size(), data.x.cols());
  for (size_t r = 0; r < batch.size(); ++r) out.row(r) = data.x.row(batch[r]);
  return out;
}

double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

size_t ModelSpec::n_params() const {
  size_t n = 0;
  for (size_t l = 1; l < widths.size(); ++l) {
    n += (widths[l - 1] + 1) * widths[l];
  }
  return n;
}

void ModelSpec::Validate() const {
  if (widths.size() < 2) throw InvalidArgument("ModelSpec: need >= 2 layers");
  for (size_t w : widths) {
    if (w == 0) throw InvalidArgument("ModelSpec: zero-width layer");
  }
  if (loss == LossKind::kBinary && widths.back() != 1) {
    throw InvalidArgument("ModelSpec: binary loss needs one output unit");
  }
  if (loss == LossKind::kCategorical && widths.back() < 2) {
    throw InvalidArgument("ModelSpec: categorical loss needs >= 2 outputs");
  }
}

ModelSpec ModelSpec::Parse(const std::string& layers, Activation hidden,
                           LossKind loss) {
  ModelSpec spec;
  spec.hidden = hidden;
  spec.loss = loss;
  std::stringstream ss(layers);
  std::string tok;
  while (std::getline(ss, tok, '-')) {
    try {
      size_t pos = 0;
      const unsigned long v = std::stoul(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
      spec.widths.push_back(v);
    } catch (const std::exception&) {
      throw InvalidArgument("ModelSpec: bad layer list '" + layers + "'");
    }
  }
  spec.Validate();
  return spec;
}

Mlp::Mlp(ModelSpec spec) : spec_(std::move(spec)) {
  spec_.Validate();
  n_params_ = spec_.n_params();
}

std::vector<double> Mlp::Init(Rng& rng) const {
  std::vector<double> w(n_params_, 0.0);
  size_t off = 0;
  for (size_t l = 1; l < spec_.widths.size(); ++l) {
    const size_t in = spec_.widths[l - 1];
    const size_t out = spec_.widths[l];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    for (size_t i = 0; i < in * out; ++i) w[off + i] = dist(rng);
    off += in * out + out;  // biases stay zero
  }
  return w;
}

std::vector<Layer> Mlp::Unpack(std::span<const double> w) const {
  if (w.size() != n_params_) throw InvalidArgument("Mlp: weight length");
  std::vector<Layer> layers;
  size_t off = 0;
  for (size_t l = 1; l < spec_.widths.size(); ++l) {
    const Eigen::Index in = spec_.widths[l - 1];
    const Eigen::Index out = spec_.widths[l];
    Layer layer;
    layer.weight = RowMap(w.data() + off, out, in);
    off += in * out;
    layer.bias = VecMap(w.data() + off, out);
    off += out;
    layers.push_back(std::move(layer));
  }
  return layers;
}

std::vector<double> Mlp::Pack(const std::vector<Layer>& layers) const {
  if (layers.size() + 1 != spec_.widths.size()) {
    throw InvalidArgument("Mlp::Pack: layer count");
  }
  std::vector<double> w(n_params_);
  size_t off = 0;
  for (size_t l = 0; l < layers.size(); ++l) {
    const Eigen::Index in = spec_.widths[l];
    const Eigen::Index out = spec_.widths[l + 1];
    if (layers[l].weight.rows() != out || layers[l].weight.cols() != in ||
        layers[l].bias.size() != out) {
      throw InvalidArgument("Mlp::Pack: layer shape");
    }
    RowMapMut(w.data() + off, out, in) = layers[l].weight;
    off += in * out;
    VecMapMut(w.data() + off, out) = layers[l].bias;
    off += out;
  }
  return w;
}

double Mlp::LossAndGrad(const Dataset& data, std::span<const size_t> batch,
                        std::span<const double> w,
                        std::span<double> grad) const {
  if (w.size() != n_params_ || grad.size() != n_params_) {
    throw InvalidArgument("Mlp: weight or gradient length");
  }
  if (data.features() != spec_.widths.front()) {
    throw InvalidArgument("Mlp: feature count mismatch");
  }
  CheckBatch(data, batch);
  const size_t layers = spec_.widths.size() - 1;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  std::vector<size_t> offsets(layers);
  for (size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += (spec_.widths[l] + 1) * spec_.widths[l + 1];
  }
  auto weight = [&](size_t l) {
    return RowMap(w.data() + offsets[l], spec_.widths[l + 1], spec_.widths[l]);
  };
  auto bias = [&](size_t l) {
    return VecMap(w.data() + offsets[l] + spec_.widths[l] * spec_.widths[l + 1],
                  spec_.widths[l + 1]);
  };

  // acts[l] is the input of layer l; pre[l] its pre-activation.
  std::vector<RowMatrix> acts(layers + 1);
  std::vector<RowMatrix> pre(layers);
  acts[0] = Gather(data, batch);
  for (size_t l = 0; l < layers; ++l) {
    pre[l] = acts[l] * weight(l).transpose();
    pre[l].rowwise() += bias(l).transpose();
    if (l + 1 < layers) {
      if (spec_.hidden == Activation::kRelu) {
        acts[l + 1] = pre[l].cwiseMax(0.0);
      } else {
        acts[l + 1] = pre[l].unaryExpr([](double z) { return Sigmoid(z); });
      }
    }
  }

  const RowMatrix& z = pre.back();
  RowMatrix delta(z.rows(), z.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int y = data.labels[batch[r]];
    if (spec_.loss == LossKind::kCategorical) {
      if (y < 0 || y >= z.cols()) throw InvalidArgument("Mlp: label range");
      const double zmax = z.row(r).maxCoeff();
      const double lse =
          zmax + std::log((z.row(r).array() - zmax).exp().sum());
      loss += lse - z(r, y);
      delta.row(r) = (z.row(r).array() - lse).exp();
      delta(r, y) -= 1.0;
    } else {
      if (y != 0 && y != 1) throw InvalidArgument("Mlp: binary label range");
      loss += Softplus(z(r, 0)) - y * z(r, 0);
      delta(r, 0) = Sigmoid(z(r, 0)) - y;
    }
  }
  loss *= inv_b;
  delta *= inv_b;

  for (size_t l = layers; l-- > 0;) {
    RowMapMut(grad.data() + offsets[l], spec_.widths[l + 1], spec_.widths[l]) =
        delta.transpose() * acts[l];
    VecMapMut(grad.data() + offsets[l] + spec_.widths[l] * spec_.widths[l + 1],
              spec_.widths[l + 1]) = delta.colwise().sum().transpose();
    if (l == 0) break;
    RowMatrix back = delta * weight(l);
    if (spec_.hidden == Activation::kRelu) {
      delta = back.array() * (pre[l - 1].array() > 0.0).cast<double>();
    } else {
      delta = back.array() * acts[l].array() * (1.0 - acts[l].array());
    }
  }
  return loss;
}

RowMatrix Mlp::Predict(const Dataset& data, std::span<const double> w) const {
  if (w.size() != n_params_) throw InvalidArgument("Mlp: weight length");
  if (data.features() != spec_.widths.front()) {
    throw InvalidArgument("Mlp: feature count mismatch");
  }
  const std::vector<Layer> layers = Unpack(w);
  RowMatrix a = data.x;
  for (size_t l = 0; l < layers.size(); ++l) {
    RowMatrix z = a * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) {
      a = spec_.hidden == Activation::kRelu
              ? RowMatrix(z.cwiseMax(0.0))
              : RowMatrix(z.unaryExpr([](double v) { return Sigmoid(v); }));
    } else {
      a = std::move(z);
    }
  }
  if (spec_.loss == LossKind::kBinary) {
    return a.unaryExpr([](double v) { return Sigmoid(v); });
  }
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double zmax = a.row(r).maxCoeff();
    a.row(r) = (a.row(r).array() - zmax).exp();
    a.row(r) /= a.row(r).sum();
  }
  return a;
}

std::vector<double> LinearRegression::Init(Rng&) const {
  return std::vector<double>(features_ + 1, 0.0);
}

double LinearRegression::LossAndGrad(const Dataset& data,
                                     std::span<const size_t> batch,
                                     std::span<const double> w,
                                     std::span<double> grad) const {
  if (w.size() != features_ + 1 || grad.size() != features_ + 1) {
    throw InvalidArgument("LinearRegression: weight or gradient length");
  }
  if (data.features() != features_ || data.targets.size() != data.size()) {
    throw InvalidArgument("LinearRegression: needs features and targets");
  }
  CheckBatch(data, batch);
  const VecMap coef(w.data(), features_);
  std::fill(grad.begin(), grad.end(), 0.0);
  VecMapMut gcoef(grad.data(), features_);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (size_t i : batch) {
    const double r = data.x.row(i).dot(coef) + w[features_] - data.targets[i];
    loss += 0.5 * r * r;
    gcoef += (r * inv_b) * data.x.row(i).transpose();
    grad[features_] += r * inv_b;
  }
  return loss * inv_b;
}

RowMatrix LinearRegression::Predict(const Dataset& data,
                                    std::span<const double> w) const {
  if (w.size() != features_ + 1) throw InvalidArgument("weight length");
  const VecMap coef(w.data(), features_);
  RowMatrix out = data.x * coef;
  out.array() += w[features_];
  return out;
}

std::vector<double> Quadratic::Init(Rng&) const {
  return std::vector<double>(center_.size(), 0.0);
}

double Quadratic::LossAndGrad(const Dataset&, std::span<const size_t>,
                              std::span<const double> w,
                              std::span<double> grad) const {
  if (w.size() != center_.size() || grad.size() != center_.size()) {
    throw InvalidArgument("Quadratic: weight or gradient length");
  }
  double loss = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    grad[i] = w[i] - center_[i];
    loss += 0.5 * grad[i] * grad[i];
  }
  return loss;
}

RowMatrix Quadratic::Predict(const Dataset& data,
                             std::span<const double>) const {
  return RowMatrix::Zero(data.size(), 1);
}

std::unique_ptr<Model> MakeModel(const ModelSpec& spec) {
  return std::make_unique<Mlp>(spec);
}

std::vector<double> Sgd(const Model& model, const Dataset& data,
                        std::span<const double> w, size_t epochs, double eta,
                        size_t batch_size, Rng& rng) {
  if (w.size() != model.n_params()) throw InvalidArgument("Sgd: weight length");
  if (batch_size == 0) throw InvalidArgument("Sgd: batch_size must be >= 1");
  if (data.size() == 0) throw InvalidArgument("Sgd: empty dataset");
  std::vector<double> cur(w.begin(), w.end());
  std::vector<double> grad(w.size());
  std::vector<size_t> order(data.size());
  for (size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t start = 0; start < order.size(); start += batch_size) {
      const size_t len = std::min(batch_size, order.size() - start);
      const std::span<const size_t> batch(order.data() + start, len);
      const double loss = model.LossAndGrad(data, batch, cur, grad);
      if (!std::isfinite(loss)) {
        throw NumericFailure("Sgd: non-finite loss in epoch " +
                             std::to_string(epoch));
      }
      for (size_t i = 0; i < cur.size(); ++i) cur[i] -= eta * grad[i];
    }
  }
  return cur;
}

double MeanLoss(const Model& model, const Dataset& data,
                std::span<const double> w) {
  std::vector<size_t> all(data.size());
  std::iota(all.begin(), all.end(), size_t{0});
  std::vector<double> grad(model.n_params());
  return model.LossAndGrad(data, all, w, grad);
}

}  // namespace fedcs::ml
