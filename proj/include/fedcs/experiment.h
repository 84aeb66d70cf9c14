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


#ifndef FEDCS_EXPERIMENT_H_
#define FEDCS_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedcs/dataset.h"
#include "fedcs/fl_protocols.h"
#include "fedcs/model.h"

namespace fedcs::sim {

struct DataSource {
  std::string kind = "synthetic";  // synthetic | idx
  // synthetic
  size_t per_client = 10;
  size_t test_records = 1000;
  double noise = 0.35;
  double jitter = 2.0;
  uint64_t task_seed = 1;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
};

struct ExperimentConfig {
  fl::Scheme scheme = fl::Scheme::kStd;
  fl::HyperParams hp;
  bool calibrate_S = false;  // median update norm at w0 instead of hp.S
  double delta = 1e-5;
  int lambda_max = 64;
  std::optional<fl::Weighting> weighting;

  double ratio = 1.0;
  size_t chunks = 1;
  uint64_t shuffle_seed = 0;
  bpdn::SolverOptions solver;
  double dp_lambda_scale = 1.0;
  int frac_bits = 20;

  std::string layers = "784-32-10";
  ml::Activation activation = ml::Activation::kRelu;
  ml::LossKind loss = ml::LossKind::kCategorical;

  DataSource data;
  size_t num_clients = 600;  // N
  ml::PartitionOptions partition;
  bool downsample = false;

  uint64_t master_seed = 1;
  size_t eval_every = 1;
  size_t early_stop_patience = 0;  // 0 disables
  std::string early_stop_metric = "accuracy";
  std::string output;
  std::string format = "csv";
  bool record_wallclock = false;

  void Validate() const;
};

ExperimentConfig LoadConfig(const std::string& path);
ExperimentConfig ParseConfig(const std::string& json_text);
std::string ConfigToJson(const ExperimentConfig& cfg);

struct RoundRecord {
  size_t round = 0;
  std::string scheme;
  double r = 1.0;
  double epsilon = 0.0;  // +inf for non-private schemes
  double cost_bits = 0.0;
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double auroc = 0.0;
  double wallclock_ms = 0.0;
  size_t solver_iterations = 0;
};

// r * n * 32 * rounds * C, in bits.
double BandwidthCost(double r, size_t n, size_t rounds, double C);

struct EarlyStopDecision {
  bool stop = false;
  size_t stop_index = 0;  // evaluation at which the run stops
  size_t best_index = 0;
  size_t best_round = 0;
};

// Stops once `metric` has not improved for `patience` evaluations.
EarlyStopDecision EarlyStop(const std::vector<RoundRecord>& records,
                            size_t patience, const std::string& metric);

double MetricOf(const RoundRecord& rec, const std::string& metric);

struct ExperimentResult {
  std::vector<RoundRecord> records;
  std::vector<double> final_weights;
  size_t n = 0;
  double S = 0.0;  // sensitivity actually used
  std::optional<EarlyStopDecision> early_stop;
};

// Runs cfg.hp.rounds rounds. on_record sees every record as it is produced.
ExperimentResult RunExperiment(
    const ExperimentConfig& cfg,
    const std::function<void(const RoundRecord&)>& on_record = {});

}  // namespace fedcs::sim

#endif  // FEDCS_EXPERIMENT_H_
