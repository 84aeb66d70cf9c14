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


#include "fedcs/dataset.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "fedcs/error.h"

namespace fedcs::ml {
namespace {

uint32_t ReadBe32(std::span<const uint8_t> bytes, size_t off,
                  const char* what) {
  if (off + 4 > bytes.size()) {
    throw FormatError(std::string(what) + ": truncated header at offset " +
                      std::to_string(off));
  }
  return (uint32_t{bytes[off]} << 24) | (uint32_t{bytes[off + 1]} << 16) |
         (uint32_t{bytes[off + 2]} << 8) | uint32_t{bytes[off + 3]};
}

std::vector<uint8_t> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

}  // namespace

Dataset Dataset::Subset(std::span<const size_t> idx) const {
  Dataset out;
  out.num_classes = num_classes;
  out.x.resize(idx.size(), x.cols());
  out.labels.reserve(idx.size());
  if (!targets.empty()) out.targets.reserve(idx.size());
  for (size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= size()) throw InvalidArgument("Subset: index out of range");
    out.x.row(r) = x.row(idx[r]);
    out.labels.push_back(labels[idx[r]]);
    if (!targets.empty()) out.targets.push_back(targets[idx[r]]);
  }
  return out;
}

std::vector<size_t> Dataset::ClassCounts() const {
  std::vector<size_t> counts(std::max(num_classes, 0), 0);
  for (int y : labels) {
    if (y >= 0 && y < num_classes) ++counts[y];
  }
  return counts;
}

void Dataset::Validate() const {
  if (labels.size() != size()) {
    throw InvalidArgument("Dataset: label count differs from record count");
  }
  if (!targets.empty() && targets.size() != size()) {
    throw InvalidArgument("Dataset: target count differs from record count");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw InvalidArgument("Dataset: label " + std::to_string(y) +
                            " outside [0, num_classes)");
    }
  }
}

Dataset Concatenate(std::span<const Dataset> parts) {
  Dataset out;
  if (parts.empty()) return out;
  size_t rows = 0;
  for (const Dataset& d : parts) {
    if (d.features() != parts[0].features()) {
      throw InvalidArgument("Concatenate: feature count mismatch");
    }
    rows += d.size();
    out.num_classes = std::max(out.num_classes, d.num_classes);
  }
  out.x.resize(rows, parts[0].x.cols());
  size_t r = 0;
  for (const Dataset& d : parts) {
    out.x.middleRows(r, d.size()) = d.x;
    r += d.size();
    out.labels.insert(out.labels.end(), d.labels.begin(), d.labels.end());
    out.targets.insert(out.targets.end(), d.targets.begin(), d.targets.end());
  }
  if (out.targets.size() != rows) out.targets.clear();
  return out;
}

Partition MakePartition(const Dataset& data, size_t clients,
                        const PartitionOptions& opts, Rng& rng) {
  if (clients == 0) throw InvalidArgument("partition: clients must be >= 1");
  if (clients > data.size()) {
    throw InvalidArgument("partition: more clients than records");
  }
  Partition part(clients);
  if (opts.mode == PartitionMode::kIid) {
    std::vector<size_t> pool;
    if (opts.ensure_class >= 0) {
      std::vector<size_t> special;
      for (size_t i = 0; i < data.size(); ++i) {
        (data.labels[i] == opts.ensure_class ? special : pool).push_back(i);
      }
      if (special.size() < clients) {
        throw InvalidArgument("partition: only " +
                              std::to_string(special.size()) +
                              " records of the ensured class for " +
                              std::to_string(clients) + " clients");
      }
      std::shuffle(special.begin(), special.end(), rng);
      for (size_t k = 0; k < clients; ++k) part[k].push_back(special[k]);
      pool.insert(pool.end(), special.begin() + clients, special.end());
    } else {
      pool.resize(data.size());
      std::iota(pool.begin(), pool.end(), size_t{0});
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    // Fill clients to near-equal sizes (differing by at most one).
    const size_t base = data.size() / clients;
    const size_t extra = data.size() % clients;
    size_t next = 0;
    for (size_t k = 0; k < clients; ++k) {
      const size_t want = base + (k < extra ? 1 : 0);
      while (part[k].size() < want && next < pool.size()) {
        part[k].push_back(pool[next++]);
      }
    }
    for (size_t k = 0; next < pool.size(); k = (k + 1) % clients) {
      part[k].push_back(pool[next++]);
    }
  } else {
    if (opts.ensure_class >= 0) {
      throw InvalidArgument("partition: ensure_class needs iid mode");
    }
    const size_t classes = static_cast<size_t>(data.num_classes);
    const size_t cpc = opts.classes_per_client;
    if (cpc < 1 || cpc > classes) {
      throw InvalidArgument("partition: classes_per_client out of range");
    }
    if (clients * cpc < classes) {
      throw InvalidArgument("partition: too few clients to cover all classes");
    }
    std::vector<std::vector<size_t>> pools(classes);
    for (size_t i = 0; i < data.size(); ++i) pools[data.labels[i]].push_back(i);
    std::vector<size_t> order(classes);
    std::iota(order.begin(), order.end(), size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    // Client k takes classes order[(k * cpc + j) mod classes], j < cpc; each
    // class pool is then split evenly over the clients that asked for it.
    std::vector<std::vector<size_t>> takers(classes);
    for (size_t k = 0; k < clients; ++k) {
      for (size_t j = 0; j < cpc; ++j) {
        takers[order[(k * cpc + j) % classes]].push_back(k);
      }
    }
    for (size_t c = 0; c < classes; ++c) {
      std::shuffle(pools[c].begin(), pools[c].end(), rng);
      const size_t t = takers[c].size();
      for (size_t i = 0; i < pools[c].size(); ++i) {
        part[takers[c][i * t / pools[c].size()]].push_back(pools[c][i]);
      }
    }
  }
  for (auto& p : part) std::sort(p.begin(), p.end());
  return part;
}

std::vector<size_t> Downsample(const Dataset& data,
                               std::span<const size_t> idx, Rng& rng) {
  std::vector<std::vector<size_t>> by_class(data.num_classes);
  for (size_t i : idx) by_class.at(data.labels.at(i)).push_back(i);
  size_t minority = SIZE_MAX;
  for (const auto& c : by_class) minority = std::min(minority, c.size());
  if (minority == 0) {
    throw InvalidArgument("downsample: a class has no records in this shard");
  }
  std::vector<size_t> kept;
  for (auto& c : by_class) {
    std::shuffle(c.begin(), c.end(), rng);
    kept.insert(kept.end(), c.begin(), c.begin() + minority);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

Partition DownsamplePartition(const Dataset& data, const Partition& part,
                              Rng& rng) {
  Partition out;
  out.reserve(part.size());
  for (const auto& p : part) out.push_back(Downsample(data, p, rng));
  return out;
}

Dataset LoadIdx(std::span<const uint8_t> image_bytes,
                std::span<const uint8_t> label_bytes) {
  const uint32_t img_magic = ReadBe32(image_bytes, 0, "images");
  if (img_magic != 0x00000803) {
    throw FormatError("images: bad magic " + std::to_string(img_magic) +
                      " at offset 0 (want 2051)");
  }
  const uint32_t count = ReadBe32(image_bytes, 4, "images");
  const uint32_t rows = ReadBe32(image_bytes, 8, "images");
  const uint32_t cols = ReadBe32(image_bytes, 12, "images");
  const size_t pixels = size_t{rows} * cols;
  const size_t need = 16 + size_t{count} * pixels;
  if (image_bytes.size() < need) {
    throw FormatError("images: truncated payload at offset " +
                      std::to_string(image_bytes.size()) + " (need " +
                      std::to_string(need) + " bytes)");
  }
  const uint32_t lbl_magic = ReadBe32(label_bytes, 0, "labels");
  if (lbl_magic != 0x00000801) {
    throw FormatError("labels: bad magic " + std::to_string(lbl_magic) +
                      " at offset 0 (want 2049)");
  }
  const uint32_t lbl_count = ReadBe32(label_bytes, 4, "labels");
  if (lbl_count != count) {
    throw FormatError("labels: count " + std::to_string(lbl_count) +
                      " at offset 4 differs from image count " +
                      std::to_string(count));
  }
  if (label_bytes.size() < 8 + size_t{count}) {
    throw FormatError("labels: truncated payload at offset " +
                      std::to_string(label_bytes.size()) + " (need " +
                      std::to_string(8 + size_t{count}) + " bytes)");
  }
  Dataset out;
  out.x.resize(count, pixels);
  out.labels.resize(count);
  int max_label = 0;
  for (size_t r = 0; r < count; ++r) {
    const uint8_t* px = image_bytes.data() + 16 + r * pixels;
    for (size_t c = 0; c < pixels; ++c) out.x(r, c) = px[c] / 255.0;
    out.labels[r] = label_bytes[8 + r];
    max_label = std::max(max_label, out.labels[r]);
  }
  out.num_classes = std::max(10, max_label + 1);
  return out;
}

Dataset LoadIdxFiles(const std::string& image_path,
                     const std::string& label_path) {
  const std::vector<uint8_t> img = ReadFile(image_path);
  const std::vector<uint8_t> lbl = ReadFile(label_path);
  return LoadIdx(img, lbl);
}

Dataset MakeSynthetic(const SyntheticSpec& spec) {
  if (spec.records == 0 || spec.side == 0 || spec.num_classes < 2) {
    throw InvalidArgument("synthetic: need records, side and >= 2 classes");
  }
  const size_t side = spec.side;
  const size_t pix = side * side;
  const double s = static_cast<double>(side);

  // Class templates from the task seed.
  Rng trng(DeriveSeed(spec.task_seed, "synthetic-templates"));
  std::uniform_real_distribution<double> center(0.25 * s, 0.75 * s);
  std::uniform_real_distribution<double> width(0.06 * s, 0.14 * s);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  std::vector<std::vector<double>> templates(spec.num_classes,
                                             std::vector<double>(pix, 0.0));
  for (auto& t : templates) {
    for (int b = 0; b < 3; ++b) {
      const double cx = center(trng);
      const double cy = center(trng);
      const double w = width(trng);
      const double a = amp(trng);
      for (size_t y = 0; y < side; ++y) {
        for (size_t x = 0; x < side; ++x) {
          const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
          t[y * side + x] += a * std::exp(-d2 / (2 * w * w));
        }
      }
    }
    const double peak = *std::max_element(t.begin(), t.end());
    for (double& v : t) v /= peak;
  }

  Rng rng(DeriveSeed(spec.seed, "synthetic-records"));
  std::uniform_int_distribution<int> label(0, spec.num_classes - 1);
  const int j = static_cast<int>(spec.jitter);
  std::uniform_int_distribution<int> shift(-j, j);
  std::normal_distribution<double> noise(0.0, spec.noise);
  std::uniform_real_distribution<double> gain(0.7, 1.0);
  Dataset out;
  out.num_classes = spec.num_classes;
  out.x.resize(spec.records, pix);
  out.labels.resize(spec.records);
  for (size_t r = 0; r < spec.records; ++r) {
    const int y = label(rng);
    const int dx = shift(rng);
    const int dy = shift(rng);
    const double g = gain(rng);
    out.labels[r] = y;
    for (size_t py = 0; py < side; ++py) {
      for (size_t px = 0; px < side; ++px) {
        const long sx = static_cast<long>(px) - dx;
        const long sy = static_cast<long>(py) - dy;
        double t = 0.0;
        if (sx >= 0 && sy >= 0 && sx < static_cast<long>(side) &&
            sy < static_cast<long>(side)) {
          t = templates[y][sy * side + sx];
        }
        // Background stays exactly zero, as in real scans.
        double v = 0.0;
        if (t > 0.05) v = std::clamp(g * t + noise(rng), 0.0, 1.0);
        out.x(r, py * side + px) = v;
      }
    }
  }
  return out;
}

}  // namespace fedcs::ml
