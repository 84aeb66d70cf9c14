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


#ifndef FEDCS_METRICS_H_
#define FEDCS_METRICS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "fedcs/dataset.h"

namespace fedcs::ml {

struct EvalReport {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double auroc = 0.0;
  // Binary tasks only (class 1 is positive); zero otherwise.
  size_t tp = 0, tn = 0, fp = 0, fn = 0;
  // confusion[true][pred]
  std::vector<std::vector<size_t>> confusion;
};

// Mean per-class recall; (TPR + TNR) / 2 for two classes. Every class in
// [0, num_classes) must occur in labels.
double BalancedAccuracy(std::span<const int> preds, std::span<const int> labels,
                        int num_classes);

// Mann-Whitney statistic with mid-ranks. labels are 0 / 1.
double Auroc(std::span<const double> scores, std::span<const int> labels);

// Macro one-vs-rest AUROC over the columns of scores.
double MacroAuroc(const RowMatrix& scores, std::span<const int> labels,
                  int num_classes);

// scores is records x outputs as returned by Model::Predict.
EvalReport Evaluate(const RowMatrix& scores, std::span<const int> labels,
                    int num_classes);

}  // namespace fedcs::ml

#endif  // FEDCS_METRICS_H_
