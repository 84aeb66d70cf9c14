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


#include "fedcs/metrics.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedcs/error.h"

namespace fedcs::ml {

double BalancedAccuracy(std::span<const int> preds, std::span<const int> labels,
                        int num_classes) {
  if (preds.size() != labels.size()) {
    throw InvalidArgument("balanced_accuracy: length mismatch");
  }
  if (num_classes < 2) {
    throw InvalidArgument("balanced_accuracy: need >= 2 classes");
  }
  std::vector<size_t> support(num_classes, 0);
  std::vector<size_t> hits(num_classes, 0);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw InvalidArgument("balanced_accuracy: label out of range");
    }
    ++support[labels[i]];
    if (preds[i] == labels[i]) ++hits[labels[i]];
  }
  double sum = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    if (support[c] == 0) {
      throw InvalidArgument("balanced_accuracy: class " + std::to_string(c) +
                            " has no records");
    }
    sum += static_cast<double>(hits[c]) / static_cast<double>(support[c]);
  }
  return sum / num_classes;
}

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw InvalidArgument("auroc: length mismatch");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  size_t pos = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (size_t k = i; k < j; ++k) {
      const int y = labels[order[k]];
      if (y != 0 && y != 1) throw InvalidArgument("auroc: labels must be 0/1");
      if (y == 1) {
        pos_rank_sum += mid;
        ++pos;
      }
    }
    i = j;
  }
  const size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    throw InvalidArgument("auroc: need both positive and negative records");
  }
  const double p = static_cast<double>(pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double MacroAuroc(const RowMatrix& scores, std::span<const int> labels,
                  int num_classes) {
  if (scores.cols() != num_classes ||
      static_cast<size_t>(scores.rows()) != labels.size()) {
    throw InvalidArgument("macro_auroc: shape mismatch");
  }
  double sum = 0.0;
  std::vector<double> col(labels.size());
  std::vector<int> onehot(labels.size());
  for (int c = 0; c < num_classes; ++c) {
    for (size_t i = 0; i < labels.size(); ++i) {
      col[i] = scores(i, c);
      onehot[i] = labels[i] == c ? 1 : 0;
    }
    sum += Auroc(col, onehot);
  }
  return sum / num_classes;
}

EvalReport Evaluate(const RowMatrix& scores, std::span<const int> labels,
                    int num_classes) {
  if (static_cast<size_t>(scores.rows()) != labels.size()) {
    throw InvalidArgument("evaluate: shape mismatch");
  }
  EvalReport rep;
  std::vector<int> preds(labels.size());
  const bool binary = scores.cols() == 1;
  if (binary && num_classes != 2) {
    throw InvalidArgument("evaluate: single-column scores need 2 classes");
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (binary) {
      preds[i] = scores(i, 0) >= 0.5 ? 1 : 0;
    } else {
      Eigen::Index arg = 0;
      scores.row(i).maxCoeff(&arg);
      preds[i] = static_cast<int>(arg);
    }
  }
  rep.confusion.assign(num_classes, std::vector<size_t>(num_classes, 0));
  size_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    ++rep.confusion.at(labels[i]).at(preds[i]);
    if (preds[i] == labels[i]) ++correct;
  }
  rep.accuracy = labels.empty() ? 0.0
                                : static_cast<double>(correct) / labels.size();
  rep.balanced_accuracy = BalancedAccuracy(preds, labels, num_classes);
  if (num_classes == 2) {
    rep.tn = rep.confusion[0][0];
    rep.fp = rep.confusion[0][1];
    rep.fn = rep.confusion[1][0];
    rep.tp = rep.confusion[1][1];
    std::vector<double> s(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
      s[i] = binary ? scores(i, 0) : scores(i, 1);
    }
    rep.auroc = Auroc(s, labels);
  } else {
    rep.auroc = MacroAuroc(scores, labels, num_classes);
  }
  return rep;
}

}  // namespace fedcs::ml
