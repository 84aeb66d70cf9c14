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


#ifndef FEDCS_DATASET_H_
#define FEDCS_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedcs/random.h"

namespace fedcs::ml {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Dataset {
  RowMatrix x;                  // records x features
  std::vector<int> labels;      // class per record
  std::vector<double> targets;  // regression targets, empty for classification
  int num_classes = 0;

  size_t size() const { return static_cast<size_t>(x.rows()); }
  size_t features() const { return static_cast<size_t>(x.cols()); }

  Dataset Subset(std::span<const size_t> idx) const;
  std::vector<size_t> ClassCounts() const;
  void Validate() const;
};

Dataset Concatenate(std::span<const Dataset> parts);

// Client id -> record indices.
using Partition = std::vector<std::vector<size_t>>;

enum class PartitionMode { kIid, kLabelSkew };

struct PartitionOptions {
  PartitionMode mode = PartitionMode::kIid;
  size_t classes_per_client = 2;  // label-skew only
  // When >= 0, every client receives at least one record of this class.
  int ensure_class = -1;
};

Partition MakePartition(const Dataset& data, size_t clients,
                        const PartitionOptions& opts, Rng& rng);

// Keeps every record of the rarest class and an equally sized random subset
// of each other class. Returns kept indices in ascending order.
std::vector<size_t> Downsample(const Dataset& data,
                               std::span<const size_t> idx, Rng& rng);

Partition DownsamplePartition(const Dataset& data, const Partition& part,
                              Rng& rng);

// IDX images (magic 0x00000803) and labels (magic 0x00000801). Pixels are
// scaled by 1/255.
Dataset LoadIdx(std::span<const uint8_t> image_bytes,
                std::span<const uint8_t> label_bytes);
Dataset LoadIdxFiles(const std::string& image_path,
                     const std::string& label_path);

struct SyntheticSpec {
  size_t records = 6000;
  size_t side = 28;  // images are side x side
  int num_classes = 10;
  double noise = 0.35;   // per-pixel Gaussian noise
  double jitter = 2.0;   // max translation of the class template, pixels
  uint64_t seed = 1;
  // Template seed; shared by train and test splits of one task.
  uint64_t task_seed = 1;
};

// Image-like classification task: each class is a sum of a few smooth
// blobs, records are translated, noisy copies clipped to [0, 1] with an
// exactly zero background.
Dataset MakeSynthetic(const SyntheticSpec& spec);

}  // namespace fedcs::ml

#endif  // FEDCS_DATASET_H_
