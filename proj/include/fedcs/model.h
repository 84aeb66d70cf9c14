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


#ifndef FEDCS_MODEL_H_
#define FEDCS_MODEL_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedcs/dataset.h"
#include "fedcs/random.h"

namespace fedcs::ml {

enum class Activation { kRelu, kSigmoid };
enum class LossKind { kCategorical, kBinary };

struct ModelSpec {
  std::vector<size_t> widths;  // input, hidden..., output
  Activation hidden = Activation::kRelu;
  LossKind loss = LossKind::kCategorical;

  size_t n_params() const;
  void Validate() const;
  // "784-32-10"
  static ModelSpec Parse(const std::string& layers, Activation hidden,
                         LossKind loss);
};

// Flat-parameter model. Loss is the batch mean.
class Model {
 public:
  virtual ~Model() = default;

  virtual size_t n_params() const = 0;
  virtual std::vector<double> Init(Rng& rng) const = 0;
  // Returns the loss on data[batch] and writes its gradient into grad.
  virtual double LossAndGrad(const Dataset& data,
                             std::span<const size_t> batch,
                             std::span<const double> w,
                             std::span<double> grad) const = 0;
  // records x outputs. Binary models return one column, P(y = 1).
  virtual RowMatrix Predict(const Dataset& data,
                            std::span<const double> w) const = 0;
};

struct Layer {
  Eigen::MatrixXd weight;  // fan_out x fan_in
  Eigen::VectorXd bias;
};

class Mlp : public Model {
 public:
  explicit Mlp(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  size_t n_params() const override { return n_params_; }
  std::vector<double> Init(Rng& rng) const override;
  double LossAndGrad(const Dataset& data, std::span<const size_t> batch,
                     std::span<const double> w,
                     std::span<double> grad) const override;
  RowMatrix Predict(const Dataset& data,
                    std::span<const double> w) const override;

  // Layout per layer: weight row-major (fan_out x fan_in), then bias.
  std::vector<Layer> Unpack(std::span<const double> w) const;
  std::vector<double> Pack(const std::vector<Layer>& layers) const;

 private:
  ModelSpec spec_;
  size_t n_params_;
};

// Least squares on Dataset::targets: w = [coef..., intercept], loss
// 0.5 * mean (x.coef + b - t)^2.
class LinearRegression : public Model {
 public:
  explicit LinearRegression(size_t features) : features_(features) {}

  size_t n_params() const override { return features_ + 1; }
  std::vector<double> Init(Rng& rng) const override;
  double LossAndGrad(const Dataset& data, std::span<const size_t> batch,
                     std::span<const double> w,
                     std::span<double> grad) const override;
  RowMatrix Predict(const Dataset& data,
                    std::span<const double> w) const override;

 private:
  size_t features_;
};

// 0.5 * ||w - center||^2 independent of the data.
class Quadratic : public Model {
 public:
  explicit Quadratic(std::vector<double> center)
      : center_(std::move(center)) {}

  size_t n_params() const override { return center_.size(); }
  std::vector<double> Init(Rng& rng) const override;
  double LossAndGrad(const Dataset& data, std::span<const size_t> batch,
                     std::span<const double> w,
                     std::span<double> grad) const override;
  RowMatrix Predict(const Dataset& data,
                    std::span<const double> w) const override;

 private:
  std::vector<double> center_;
};

std::unique_ptr<Model> MakeModel(const ModelSpec& spec);

// Mini-batch SGD over `epochs` passes; batch order drawn from rng.
std::vector<double> Sgd(const Model& model, const Dataset& data,
                        std::span<const double> w, size_t epochs, double eta,
                        size_t batch_size, Rng& rng);

double MeanLoss(const Model& model, const Dataset& data,
                std::span<const double> w);

}  // namespace fedcs::ml

#endif  // FEDCS_MODEL_H_
